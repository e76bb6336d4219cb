#include "bxent/curves.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

std::vector<Bin> bin_points(std::span<const Point> points, std::size_t n_bins) {
  if (points.empty()) return {};
  if (n_bins == 0) throw std::invalid_argument("n_bins must be positive");
  double lo = points.front().x;
  double hi = lo;
  for (const auto& p : points) {
    lo = std::min(lo, p.x);
    hi = std::max(hi, p.x);
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<double> sums(n_bins, 0.0);
  std::vector<std::size_t> counts(n_bins, 0);
  for (const auto& p : points) {
    std::size_t idx = 0;
    if (width > 0.0) {
      idx = static_cast<std::size_t>(std::floor((p.x - lo) / width));
      idx = std::min(idx, n_bins - 1);
    }
    sums[idx] += p.y;
    ++counts[idx];
  }
  std::vector<Bin> bins;
  for (std::size_t i = 0; i < n_bins; ++i) {
    if (counts[i] == 0) continue;
    const double center = width > 0.0 ? lo + (static_cast<double>(i) + 0.5) * width : lo;
    bins.push_back({i, center, sums[i] / static_cast<double>(counts[i]), counts[i]});
  }
  return bins;
}

std::vector<double> rolling_mean(std::span<const double> ys, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  const std::size_t n = ys.size();
  const std::size_t left_full = window / 2;
  const std::size_t right_full = window - 1 - left_full;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + ys[i];
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t left = std::min(left_full, i);
    std::size_t right = std::min(right_full, n - 1 - i);
    if (left < left_full || right < right_full) left = right = std::min(left, right);
    const std::size_t a = i - left;
    const std::size_t b = i + right + 1;
    out[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
  }
  return out;
}

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

Polynomial Polynomial::derivative() const {
  Polynomial d;
  for (std::size_t k = 1; k < coeffs.size(); ++k) d.coeffs.push_back(static_cast<double>(k) * coeffs[k]);
  return d;
}

int Polynomial::degree() const {
  for (std::size_t k = coeffs.size(); k-- > 0;) {
    if (coeffs[k] != 0.0) return static_cast<int>(k);
  }
  return -1;
}

PolyFit polyfit(std::span<const double> xs, std::span<const double> ys, std::size_t degree) {
  if (xs.size() != ys.size()) throw std::invalid_argument("polyfit: xs and ys differ in length");
  std::set<double> distinct(xs.begin(), xs.end());
  if (distinct.size() < degree + 1) {
    throw FitError(fmt::format("need {} distinct x values for degree {}, got {}", degree + 1, degree, distinct.size()));
  }
  const double lo = *distinct.begin();
  const double hi = *distinct.rbegin();
  const double c = 0.5 * (lo + hi);
  const double s = 0.5 * (hi - lo);
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto m = static_cast<Eigen::Index>(degree + 1);
  Eigen::MatrixXd A(n, m);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (xs[i] - c) / s;
    double power = 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      A(i, k) = power;
      power *= t;
    }
    b(i) = ys[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < m) throw FitError(fmt::format("rank-deficient design matrix (rank {} < {})", qr.rank(), m));
  const Eigen::VectorXd a = qr.solve(b);
  PolyFit fit;
  fit.residual_norm = (A * a - b).norm();

  // P(x) = sum_k a_k ((x - c) / s)^k, expanded binomially.
  fit.poly.coeffs.assign(degree + 1, 0.0);
  for (std::size_t k = 0; k <= degree; ++k) {
    const double scaled = a(static_cast<Eigen::Index>(k)) / std::pow(s, static_cast<double>(k));
    double binom = 1.0;
    for (std::size_t j = 0; j <= k; ++j) {
      if (j > 0) binom = binom * static_cast<double>(k - j + 1) / static_cast<double>(j);
      fit.poly.coeffs[j] += scaled * binom * std::pow(-c, static_cast<double>(k - j));
    }
  }
  for (double v : fit.poly.coeffs) {
    if (!std::isfinite(v)) throw FitError("non-finite polynomial coefficient");
  }
  return fit;
}

namespace {

double bisect(const Polynomial& p, double a, double b, double fa) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    const double fm = p(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

std::vector<double> real_roots(const Polynomial& p, double lo, double hi) {
  const int d = p.degree();
  if (d <= 0 || lo > hi) return {};
  if (d == 1) {
    const double r = -p.coeffs[0] / p.coeffs[1];
    if (r >= lo && r <= hi) return {r};
    return {};
  }
  std::vector<double> breaks{lo};
  for (double r : real_roots(p.derivative(), lo, hi)) {
    if (r > breaks.back()) breaks.push_back(r);
  }
  if (hi > breaks.back()) breaks.push_back(hi);

  std::vector<double> roots;
  auto add = [&](double r) {
    if (roots.empty() || r > roots.back()) roots.push_back(r);
  };
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i];
    const double b = breaks[i + 1];
    const double fa = p(a);
    const double fb = p(b);
    if (fa == 0.0) {
      add(a);
    } else if (fb != 0.0 && (fa < 0.0) != (fb < 0.0)) {
      add(bisect(p, a, b, fa));
    }
  }
  if (p(breaks.back()) == 0.0) add(breaks.back());
  return roots;
}

std::string_view to_string(InflectionFlag flag) {
  return flag == InflectionFlag::stationary_min ? "stationary_min" : "range_edge";
}

Inflection inflection_point(const Polynomial& p, double lo, double hi) {
  const Polynomial d1 = p.derivative();
  const Polynomial d2 = d1.derivative();
  auto roots = real_roots(d1, lo, hi);
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
    if (d2(*it) > 0.0) return {*it, InflectionFlag::stationary_min};
  }
  return {p(lo) <= p(hi) ? lo : hi, InflectionFlag::range_edge};
}

double CurveSeries::fitted_at(double x) const { return Polynomial{coeffs}(x); }

CurveSeries fit_curve(std::string model, std::string facet, std::vector<Point> points,
                      std::vector<std::string> case_ids, const CurveOptions& options) {
  if (case_ids.size() != points.size()) throw std::invalid_argument("fit_curve: one case id per point");
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].x != points[b].x) return points[a].x < points[b].x;
    if (points[a].y != points[b].y) return points[a].y < points[b].y;
    return case_ids[a] < case_ids[b];
  });

  CurveSeries s;
  s.model = std::move(model);
  s.facet = std::move(facet);
  s.points.reserve(points.size());
  s.case_ids.reserve(points.size());
  for (auto i : order) {
    s.points.push_back(points[i]);
    s.case_ids.push_back(std::move(case_ids[i]));
  }
  if (s.points.empty()) return s;

  s.x_min = s.points.front().x;
  s.x_max = s.points.back().x;
  s.deviation.n = s.points.size();
  s.deviation.min = s.deviation.max = s.points.front().y - s.points.front().x;
  double total = 0.0;
  for (const auto& p : s.points) {
    const double gap = p.y - p.x;
    total += gap;
    s.deviation.min = std::min(s.deviation.min, gap);
    s.deviation.max = std::max(s.deviation.max, gap);
  }
  s.deviation.mean = total / static_cast<double>(s.points.size());

  s.bins = bin_points(s.points, options.bins);
  std::vector<double> means;
  std::vector<double> centers;
  for (const auto& b : s.bins) {
    means.push_back(b.mean);
    centers.push_back(b.center);
  }
  s.smoothed = rolling_mean(means, options.window);
  s.inflection = {s.x_min, InflectionFlag::range_edge};
  if (s.bins.size() >= std::max(options.min_occupied_bins, options.degree + 1)) {
    const auto fit = polyfit(centers, s.smoothed, options.degree);
    s.fitted = true;
    s.coeffs = fit.poly.coeffs;
    s.residual_norm = fit.residual_norm;
    s.inflection = inflection_point(fit.poly, s.x_min, s.x_max);
  }
  return s;
}

std::vector<std::string> facets_of(const ScoredCase& row) {
  std::vector<std::string> out{"overall", fmt::format("setup:{}", to_string(row.setup))};
  out.push_back(row.h == 0 ? fmt::format("setting:{} (Def)", row.setting) : fmt::format("setting:{}", row.setting));
  out.push_back(fmt::format("h:{}", row.h));
  return out;
}

FitReport fit_scores(std::span<const ScoredCase> rows, const CurveOptions& options) {
  struct Acc {
    std::vector<Point> points;
    std::vector<std::string> ids;
  };
  std::map<std::string, std::map<std::string, Acc>> grouped;
  for (const auto& r : rows) {
    for (const auto& facet : facets_of(r)) {
      auto& acc = grouped[r.model][facet];
      acc.points.push_back({r.H, r.CE});
      acc.ids.push_back(r.case_id);
    }
  }
  FitReport report;
  report.options = options;
  for (auto& [model, facets] : grouped) {
    for (auto& [facet, acc] : facets) {
      report.models[model].emplace(facet, fit_curve(model, facet, std::move(acc.points), std::move(acc.ids), options));
    }
  }
  return report;
}

void write_fit_json(std::ostream& out, const FitReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["options"] = {{"bins", report.options.bins},
                  {"window", report.options.window},
                  {"degree", report.options.degree},
                  {"min_occupied_bins", report.options.min_occupied_bins}};
  json models = json::object();
  for (const auto& [model, facets] : report.models) {
    json fj = json::object();
    for (const auto& [facet, s] : facets) {
      json sj;
      sj["n_points"] = s.points.size();
      sj["x_range"] = {s.x_min, s.x_max};
      sj["fitted"] = s.fitted;
      if (!s.fitted) sj["note"] = "fit skipped";
      sj["coeffs"] = s.coeffs;
      sj["residual_norm"] = s.residual_norm;
      sj["inflection"] = {{"x", s.inflection.x}, {"flag", to_string(s.inflection.flag)}};
      sj["deviation"] = {{"n", s.deviation.n},
                         {"mean", s.deviation.mean},
                         {"min", s.deviation.min},
                         {"max", s.deviation.max}};
      json bins = json::array();
      for (std::size_t i = 0; i < s.bins.size(); ++i) {
        bins.push_back({{"index", s.bins[i].index},
                        {"center", s.bins[i].center},
                        {"mean", s.bins[i].mean},
                        {"count", s.bins[i].count},
                        {"smoothed", s.smoothed[i]}});
      }
      sj["bins"] = std::move(bins);
      fj[facet] = std::move(sj);
    }
    models[model] = std::move(fj);
  }
  j["models"] = std::move(models);
  out << j.dump(2) << '\n';
}

std::vector<ComparisonRow> compare_models(std::span<const CurveSeries* const> series) {
  if (series.size() < 2) throw ComparisonError("comparison needs at least two models");
  std::set<std::string> shared(series[0]->case_ids.begin(), series[0]->case_ids.end());
  double lo = series[0]->x_min;
  double hi = series[0]->x_max;
  for (const auto* s : series.subspan(1)) {
    std::set<std::string> next;
    for (const auto& id : s->case_ids) {
      if (shared.count(id)) next.insert(id);
    }
    if (next.empty()) throw ComparisonError("model " + s->model + " was scored on a disjoint case set");
    shared = std::move(next);
    lo = std::max(lo, s->x_min);
    hi = std::min(hi, s->x_max);
  }

  std::vector<ComparisonRow> rows;
  for (const auto* s : series) {
    ComparisonRow row;
    row.model = s->model;
    row.inflection = s->inflection;
    double total = 0.0;
    for (const auto& p : s->points) {
      if (p.x < lo || p.x > hi) continue;
      total += p.y - p.x;
      ++row.n_points;
    }
    row.mean_gap = row.n_points ? total / static_cast<double>(row.n_points) : 0.0;
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    if (a.inflection.x != b.inflection.x) return a.inflection.x < b.inflection.x;
    if (a.mean_gap != b.mean_gap) return a.mean_gap < b.mean_gap;
    return a.model < b.model;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  out << "rank,model,x_star,flag,mean_gap,n_points\n";
  for (const auto& r : rows) {
    out << r.rank << ',' << csv_field(r.model) << ',' << format_double(r.inflection.x) << ','
        << to_string(r.inflection.flag) << ',' << format_double(r.mean_gap) << ',' << r.n_points << '\n';
  }
}

void write_comparison_text(std::ostream& out, std::string_view facet, std::span<const ComparisonRow> rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.model.size());
  out << fmt::format("{}\n", facet);
  out << fmt::format("  {:>4}  {:<{}}  {:>8}  {:<14}  {:>9}  {:>7}\n", "rank", "model", width, "x*", "flag",
                     "CE-H", "points");
  for (const auto& r : rows) {
    out << fmt::format("  {:>4}  {:<{}}  {:>8.4f}  {:<14}  {:>9.4f}  {:>7}\n", r.rank, r.model, width,
                       r.inflection.x, to_string(r.inflection.flag), r.mean_gap, r.n_points);
  }
}

void write_curve_csv(std::ostream& out, const CurveSeries& series) {
  out << "x,raw_mean,smoothed,fitted\n";
  for (std::size_t i = 0; i < series.bins.size(); ++i) {
    const auto& b = series.bins[i];
    out << format_double(b.center) << ',' << format_double(b.mean) << ',' << format_double(series.smoothed[i])
        << ',';
    if (series.fitted) out << format_double(series.fitted_at(b.center));
    out << '\n';
  }
}

}  // namespace bxent
