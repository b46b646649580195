#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mimicgait/protocol.hpp"

namespace mimicgait {

/// Rank-K curves, one polyline per (method, scenario).
std::string rank_curve_svg(const std::vector<EvalReport>& reports);
/// Rank-1 RP bars for every report that has an RP.
std::string rp_bar_svg(const std::vector<EvalReport>& reports);
/// Rank-1 against the amount-range midpoint for scenarios with an override,
/// one line per method. Empty string when there is nothing to plot.
std::string range_sweep_svg(const std::vector<EvalReport>& reports);

/// Writes comparison.csv and the SVG plots into `out_dir`; returns the files written.
std::vector<std::filesystem::path> render_report(const std::vector<EvalReport>& reports,
                                                 const std::filesystem::path& out_dir);

/// Reads an EvalReport, or a JSON array of them, from disk.
std::vector<EvalReport> load_reports(const std::filesystem::path& file);

}  // namespace mimicgait
