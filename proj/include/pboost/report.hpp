#pragma once

// Tables and SVG plots of partial effects.

#include <filesystem>
#include <string>

#include "pboost/engine.hpp"

namespace pboost {

/// Term id reduced to [A-Za-z0-9_.-] for file names.
std::string sanitize_filename(const std::string& text);

/// Columns: the axes (or `level`), then estimate, lower, upper.
void write_partial_effect_csv(const PartialEffect& pe, const std::filesystem::path& path);

/// Standalone SVG: estimate line over a shaded band for continuous terms,
/// points with error bars for level terms, a heat map for surfaces.
/// Coordinates use fixed precision so identical inputs give identical bytes.
std::string partial_effect_svg(const PartialEffect& pe);
void render_partial_effect_svg(const PartialEffect& pe, const std::filesystem::path& path);

}  // namespace pboost
