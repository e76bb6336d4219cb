#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bxent/scoring.hpp"

namespace bxent {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Bin {
  /// 0-based position among the n_bins equal-width bins.
  std::size_t index = 0;
  double center = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [min x, max x]; only occupied bins are returned, in
/// ascending order. A point on an interior boundary belongs to the higher
/// bin, the maximum to the last bin. Zero width gives a single bin.
std::vector<Bin> bin_points(std::span<const Point> points, std::size_t n_bins = 200);

/// Centered moving average. Near the ends the window shrinks to the same
/// number of entries on both sides.
std::vector<double> rolling_mean(std::span<const double> ys, std::size_t window = 30);

/// Polynomial in x with ascending coefficients (constant first).
struct Polynomial {
  std::vector<double> coeffs;

  double operator()(double x) const;
  Polynomial derivative() const;
  /// Degree after dropping exactly-zero leading coefficients; -1 for zero.
  int degree() const;
};

struct PolyFit {
  Polynomial poly;
  double residual_norm = 0.0;
};

/// Least squares by column-pivoted QR on x mapped to [-1, 1], expanded back
/// to coefficients in x. Throws FitError with fewer than degree + 1 distinct
/// x values or a numerically rank-deficient system.
PolyFit polyfit(std::span<const double> xs, std::span<const double> ys, std::size_t degree = 4);

/// Real roots of p inside [lo, hi], ascending.
std::vector<double> real_roots(const Polynomial& p, double lo, double hi);

enum class InflectionFlag { stationary_min, range_edge };

std::string_view to_string(InflectionFlag flag);

struct Inflection {
  double x = 0.0;
  InflectionFlag flag = InflectionFlag::range_edge;
};

/// Largest local minimum of p inside [lo, hi]. Without one, the lower edge
/// when p(lo) <= p(hi) (the curve keeps falling with x, as X=Y does) and the
/// upper edge otherwise, flagged range_edge.
Inflection inflection_point(const Polynomial& p, double lo, double hi);

struct CurveOptions {
  std::size_t bins = 200;
  std::size_t window = 30;
  std::size_t degree = 4;
  /// Facets with fewer occupied bins keep their raw points but are not fitted.
  std::size_t min_occupied_bins = 5;
};

struct Deviation {
  std::size_t n = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct CurveSeries {
  std::string model;
  std::string facet;
  std::vector<Point> points;
  std::vector<std::string> case_ids;
  std::vector<Bin> bins;
  std::vector<double> smoothed;
  bool fitted = false;
  std::vector<double> coeffs;
  double residual_norm = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  Inflection inflection;
  /// Statistics of CE - H over the facet's points.
  Deviation deviation;

  double fitted_at(double x) const;
};

/// bin -> rolling mean over bin means -> polynomial fit on (center, smoothed).
CurveSeries fit_curve(std::string model, std::string facet, std::vector<Point> points,
                      std::vector<std::string> case_ids, const CurveOptions& options = {});

/// Facet names for one scored row: "overall", "setup:<S>", "setting:<name>"
/// (h > 0) or "setting:<name> (Def)" (h = 0), and "h:<n>".
std::vector<std::string> facets_of(const ScoredCase& row);

struct FitReport {
  CurveOptions options;
  /// model -> facet -> series
  std::map<std::string, std::map<std::string, CurveSeries>> models;
};

FitReport fit_scores(std::span<const ScoredCase> rows, const CurveOptions& options = {});

void write_fit_json(std::ostream& out, const FitReport& report);

struct ComparisonRow {
  std::size_t rank = 0;
  std::string model;
  Inflection inflection;
  /// Mean CE - H over points inside the x range shared by all models.
  double mean_gap = 0.0;
  std::size_t n_points = 0;
};

/// Orders models ascending by x*, ties by mean gap. Throws ComparisonError
/// for fewer than two series or case sets that do not overlap.
std::vector<ComparisonRow> compare_models(std::span<const CurveSeries* const> series);

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows);
void write_comparison_text(std::ostream& out, std::string_view facet, std::span<const ComparisonRow> rows);

/// x,raw_mean,smoothed,fitted per occupied bin.
void write_curve_csv(std::ostream& out, const CurveSeries& series);

}  // namespace bxent
