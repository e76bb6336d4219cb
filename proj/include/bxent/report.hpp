#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bxent/curves.hpp"

namespace bxent {

/// One SVG chart: every series in `series` over a shared H axis, the X=Y
/// reference line, bin means as dots and the fitted quartic as a line.
/// Unfitted series show their raw points and a "fit skipped" note.
std::string render_svg(const std::string& title, const std::vector<const CurveSeries*>& series);

/// File-name-safe form of a facet name ("setting:Age (Def)" -> "setting-Age-Def").
std::string facet_slug(std::string_view facet);

/// Writes report.svg (overall overlay), report/<facet>.svg for every facet,
/// curves/<model>/<facet>.csv, comparison.csv and comparison.txt under
/// `out`. Returns the files written, relative to `out`.
std::vector<std::filesystem::path> emit_report(const FitReport& report, const std::filesystem::path& out);

}  // namespace bxent
