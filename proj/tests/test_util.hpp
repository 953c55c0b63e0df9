#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "pboost/log.hpp"
#include "pboost/table.hpp"

namespace testutil {

inline pboost::Column continuous(const std::string& name, std::vector<double> values) {
  pboost::Column c;
  c.schema.name = name;
  c.schema.kind = pboost::ColumnKind::continuous;
  c.values = std::move(values);
  return c;
}

inline pboost::Column categorical(const std::string& name, std::vector<std::string> levels,
                                  std::vector<double> codes, std::string reference = "") {
  pboost::Column c;
  c.schema.name = name;
  c.schema.kind = pboost::ColumnKind::categorical;
  c.schema.levels = std::move(levels);
  c.schema.reference = std::move(reference);
  c.values = std::move(codes);
  return c;
}

inline pboost::Column weight(const std::string& name, std::vector<double> values) {
  pboost::Column c = continuous(name, std::move(values));
  c.schema.kind = pboost::ColumnKind::weight;
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("pboost_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Collects warnings while alive.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = pboost::log::set_sink([this](pboost::log::Level level, std::string_view,
                                             std::string_view message) {
      if (level == pboost::log::Level::warning) messages.emplace_back(message);
    });
  }
  ~WarningCapture() { pboost::log::set_sink(previous_); }
  WarningCapture(const WarningCapture&) = delete;
  WarningCapture& operator=(const WarningCapture&) = delete;

  std::vector<std::string> messages;

 private:
  pboost::log::Sink previous_;
};

}  // namespace testutil
