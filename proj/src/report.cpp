#include "pboost/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pboost/error.hpp"

namespace pboost {
namespace {

const char* const kModule = "cli";

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 30.0;
constexpr double kBottom = 60.0;

std::string num(double v, int digits = 3) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo;
  double hi;

  void widen() {
    if (hi - lo < 1e-12) {
      const double pad = std::max(0.5, 0.1 * std::abs(lo));
      lo -= pad;
      hi += pad;
    }
  }
};

Range range_of(std::initializer_list<const std::vector<double>*> series) {
  Range r{INFINITY, -INFINITY};
  for (const auto* s : series) {
    for (double v : *s) {
      if (!std::isfinite(v)) continue;
      r.lo = std::min(r.lo, v);
      r.hi = std::max(r.hi, v);
    }
  }
  if (!std::isfinite(r.lo)) r = {0.0, 0.0};
  r.widen();
  return r;
}

struct Frame {
  Range x;
  Range y;
  double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
  double py(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

void axes(std::ostringstream& out, const Frame& f, const std::string& xlabel,
          const std::string& ylabel, bool x_ticks) {
  const double x0 = kLeft;
  const double x1 = kWidth - kRight;
  const double y0 = kHeight - kBottom;
  const double y1 = kTop;
  out << "<g stroke=\"#000\" stroke-width=\"1\" fill=\"none\">\n";
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x1) << "\" y2=\""
      << num(y0) << "\"/>\n";
  out << "<line x1=\"" << num(x0) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(x0) << "\" y2=\""
      << num(y1) << "\"/>\n";
  out << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#000\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = f.y.lo + (f.y.hi - f.y.lo) * k / 4.0;
    out << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">"
        << num(yv, 2) << "</text>\n";
    if (x_ticks) {
      const double xv = f.x.lo + (f.x.hi - f.x.lo) * k / 4.0;
      out << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(y0 + 16)
          << "\" text-anchor=\"middle\">" << num(xv, 2) << "</text>\n";
    }
  }
  out << "<text x=\"" << num(0.5 * (x0 + x1)) << "\" y=\"" << num(kHeight - 12)
      << "\" text-anchor=\"middle\">" << xml_escape(xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << num(0.5 * (y0 + y1)) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num(0.5 * (y0 + y1)) << ")\">" << xml_escape(ylabel) << "</text>\n";
  out << "</g>\n";
}

void zero_line(std::ostringstream& out, const Frame& f) {
  if (f.y.lo > 0.0 || f.y.hi < 0.0) return;
  out << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(f.py(0.0)) << "\" x2=\"" << num(kWidth - kRight)
      << "\" y2=\"" << num(f.py(0.0)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
}

void curve(std::ostringstream& out, const PartialEffect& pe) {
  const auto& x = pe.grid.x;
  const bool band = pe.lower.size() == x.size() && pe.upper.size() == x.size();
  const Frame f{range_of({&x}), band ? range_of({&pe.estimate, &pe.lower, &pe.upper})
                                     : range_of({&pe.estimate})};
  axes(out, f, pe.axes.empty() ? "" : pe.axes[0], "Partial effect: " + pe.label, true);
  zero_line(out, f);
  if (band) {
    out << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) out << num(f.px(x[i])) << ',' << num(f.py(pe.upper[i])) << ' ';
    for (std::size_t i = x.size(); i-- > 0;) out << num(f.px(x[i])) << ',' << num(f.py(pe.lower[i])) << ' ';
    out << "\"/>\n";
  }
  if (x.size() == 1) {
    out << "<circle cx=\"" << num(f.px(x[0])) << "\" cy=\"" << num(f.py(pe.estimate[0]))
        << "\" r=\"3\" fill=\"#08519c\"/>\n";
    return;
  }
  out << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) {
    out << (i ? " " : "") << num(f.px(x[i])) << ',' << num(f.py(pe.estimate[i]));
  }
  out << "\"/>\n";
}

void levels(std::ostringstream& out, const PartialEffect& pe) {
  const auto& labels = pe.grid.levels;
  const bool band = pe.lower.size() == labels.size() && pe.upper.size() == labels.size();
  Frame f{{0.0, static_cast<double>(labels.size()) + 1.0},
          band ? range_of({&pe.estimate, &pe.lower, &pe.upper}) : range_of({&pe.estimate})};
  axes(out, f, pe.label, "Partial effect", false);
  zero_line(out, f);
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#000\">\n";
  for (std::size_t k = 0; k < labels.size(); ++k) {
    out << "<text x=\"" << num(f.px(k + 1.0)) << "\" y=\"" << num(kHeight - kBottom + 16)
        << "\" text-anchor=\"middle\">" << xml_escape(labels[k]) << "</text>\n";
  }
  out << "</g>\n<g stroke=\"#08519c\" stroke-width=\"2\" fill=\"#08519c\">\n";
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double cx = f.px(k + 1.0);
    if (band) {
      out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(f.py(pe.lower[k])) << "\" x2=\"" << num(cx)
          << "\" y2=\"" << num(f.py(pe.upper[k])) << "\"/>\n";
      for (double v : {pe.lower[k], pe.upper[k]}) {
        out << "<line x1=\"" << num(cx - 5) << "\" y1=\"" << num(f.py(v)) << "\" x2=\"" << num(cx + 5)
            << "\" y2=\"" << num(f.py(v)) << "\"/>\n";
      }
    }
    out << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(f.py(pe.estimate[k])) << "\" r=\"4\"/>\n";
  }
  out << "</g>\n";
}

// Blue (negative) to white to red (positive), symmetric around zero.
std::string fill_for(double v, double scale) {
  const double t = scale > 0.0 ? std::clamp(v / scale, -1.0, 1.0) : 0.0;
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
  char buf[16];
  if (t >= 0.0) {
    std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
  } else {
    std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
  }
  return buf;
}

void surface(std::ostringstream& out, const PartialEffect& pe) {
  std::vector<double> xs = pe.grid.x;
  std::vector<double> ys = pe.grid.y;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const Frame f{range_of({&xs}), range_of({&ys})};
  axes(out, f, pe.axes.size() > 0 ? pe.axes[0] : "", pe.axes.size() > 1 ? pe.axes[1] : "", true);
  double scale = 0.0;
  for (double v : pe.estimate) scale = std::max(scale, std::abs(v));
  const double cw = (kWidth - kLeft - kRight) / static_cast<double>(xs.size());
  const double ch = (kHeight - kTop - kBottom) / static_cast<double>(ys.size());
  out << "<g stroke=\"none\">\n";
  for (std::size_t i = 0; i < pe.estimate.size(); ++i) {
    const auto ix = std::lower_bound(xs.begin(), xs.end(), pe.grid.x[i]) - xs.begin();
    const auto iy = std::lower_bound(ys.begin(), ys.end(), pe.grid.y[i]) - ys.begin();
    out << "<rect x=\"" << num(kLeft + ix * cw) << "\" y=\"" << num(kHeight - kBottom - (iy + 1) * ch)
        << "\" width=\"" << num(cw) << "\" height=\"" << num(ch) << "\" fill=\""
        << fill_for(pe.estimate[i], scale) << "\"/>\n";
  }
  out << "</g>\n";
}

}  // namespace

std::string sanitize_filename(const std::string& text) {
  std::string out;
  for (char c : text) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

void write_partial_effect_csv(const PartialEffect& pe, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  const bool by_level = !pe.grid.levels.empty();
  const bool band = pe.lower.size() == pe.estimate.size();
  if (by_level) {
    out << "level";
  } else {
    for (std::size_t a = 0; a < pe.axes.size(); ++a) out << (a ? "," : "") << csv_escape(pe.axes[a]);
  }
  out << ",estimate,lower,upper\n";
  for (std::size_t i = 0; i < pe.estimate.size(); ++i) {
    if (by_level) {
      out << csv_escape(pe.grid.levels[i]);
    } else {
      out << format_double(pe.grid.x[i]);
      if (!pe.grid.y.empty()) out << ',' << format_double(pe.grid.y[i]);
    }
    out << ',' << format_double(pe.estimate[i]) << ',' << (band ? format_double(pe.lower[i]) : "")
        << ',' << (band ? format_double(pe.upper[i]) : "") << '\n';
  }
}

std::string partial_effect_svg(const PartialEffect& pe) {
  if (pe.estimate.empty()) throw DataError(kModule, "partial effect of '" + pe.term_id + "' is empty");
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth, 0) << "\" height=\""
      << num(kHeight, 0) << "\" viewBox=\"0 0 " << num(kWidth, 0) << ' ' << num(kHeight, 0) << "\">\n"
      << "<title>" << xml_escape(pe.label) << "</title>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  if (!pe.grid.levels.empty()) {
    levels(out, pe);
  } else if (!pe.grid.y.empty()) {
    surface(out, pe);
  } else {
    curve(out, pe);
  }
  out << "</svg>\n";
  return out.str();
}

void render_partial_effect_svg(const PartialEffect& pe, const std::filesystem::path& path) {
  const std::string svg = partial_effect_svg(pe);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(kModule, "cannot write '" + path.string() + "'");
  out << svg;
}

}  // namespace pboost
