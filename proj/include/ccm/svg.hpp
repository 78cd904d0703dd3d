#pragma once

#include <string>

#include "ccm/model.hpp"

namespace ccm {

/// Deterministic SVG cluster summary. One horizontal band per class, height
/// proportional to its mixing weight (sorted decreasing, cumulative
/// proportions labeled on the left). Within a band, left to right: one bar
/// per multi-variable block for rho (sorted decreasing), the tau weights of
/// those blocks (each sorted decreasing), and the blocks-by-variables
/// membership grid.
std::string model_summary_svg(const CcmModel& model);

void save_summary_svg(const CcmModel& model, const std::string& path);

}  // namespace ccm
