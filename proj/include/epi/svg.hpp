#pragma once

#include "epi/power_study.hpp"

#include <string>

namespace epi {

// Self-contained SVG emitters. Output bytes are a pure function of the
// inputs: fixed layout, fixed formatting, no timestamps.

// Power vs target R^2: one panel per (setting, model) in first-seen order,
// one polyline per method. An empty table renders axes plus a "no data"
// annotation.
std::string power_curves_svg(const PowerTable& table);

// Per-variable significance frequencies: variables down the side, methods
// across. 0 renders white, 1 renders #08306b, linear in between. A heatmap
// with no iterations renders a "no data" annotation instead of cells.
std::string heatmap_svg(const DiscoveryHeatmap& h);

}  // namespace epi
