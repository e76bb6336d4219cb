#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bxent/curves.hpp"
#include "bxent/error.hpp"
#include "bxent/rng.hpp"

using namespace bxent;

namespace {

// Normal-equation least squares in long double with Gauss-Jordan elimination;
// independent of the QR path under test. Also returns (X^T X)^-1.
struct NormalFit {
  std::vector<long double> coeffs;
  std::vector<std::vector<long double>> inverse;
};

NormalFit normal_equations(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t degree) {
  const std::size_t m = degree + 1;
  std::vector<std::vector<long double>> a(m, std::vector<long double>(2 * m + 1, 0.0L));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::vector<long double> pw(m);
    pw[0] = 1.0L;
    for (std::size_t k = 1; k < m; ++k) pw[k] = pw[k - 1] * xs[i];
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) a[r][c] += pw[r] * pw[c];
      a[r][2 * m] += pw[r] * ys[i];
    }
  }
  for (std::size_t r = 0; r < m; ++r) a[r][m + r] = 1.0L;
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    const long double d = a[col][col];
    for (auto& v : a[col]) v /= d;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const long double f = a[r][col];
      for (std::size_t c = 0; c < 2 * m + 1; ++c) a[r][c] -= f * a[col][c];
    }
  }
  NormalFit fit;
  for (std::size_t r = 0; r < m; ++r) {
    fit.coeffs.push_back(a[r][2 * m]);
    fit.inverse.emplace_back(a[r].begin() + static_cast<long>(m), a[r].begin() + static_cast<long>(2 * m));
  }
  return fit;
}

std::vector<Point> to_points(const std::vector<double>& xs, double y = 0.0) {
  std::vector<Point> pts;
  for (double x : xs) pts.push_back({x, y});
  return pts;
}

}  // namespace

TEST_CASE("bin_points edge cases") {
  SUBCASE("identical x gives one bin") {
    const auto bins = bin_points(to_points({1.5, 1.5, 1.5}, 2.0));
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].count == 3);
    CHECK(bins[0].mean == 2.0);
    CHECK(bins[0].center == 1.5);
  }
  SUBCASE("range ends land in the first and last bins") {
    const auto bins = bin_points(to_points({0.0, 4.0}), 200);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].index == 0);
    CHECK(bins[1].index == 199);
  }
  SUBCASE("interior boundary belongs to the higher bin") {
    // width 1 over [0, 4]; x = 2 sits on the boundary between bins 1 and 2.
    const auto bins = bin_points(to_points({0.0, 2.0, 4.0}), 4);
    REQUIRE(bins.size() == 3);
    CHECK(bins[1].index == 2);
    CHECK(bins[1].center == 2.5);
  }
  SUBCASE("empty input") { CHECK(bin_points({}, 10).empty()); }
}

TEST_CASE("bin_points on uniform data") {
  Rng rng(42);
  std::vector<Point> pts;
  double sum_y = 0.0;
  double sum_y2 = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double y = rng.normal();
    pts.push_back({rng.uniform() * 3.0, y});
    sum_y += y;
    sum_y2 += y * y;
  }
  const auto bins = bin_points(pts, 200);
  std::size_t total = 0;
  for (const auto& b : bins) total += b.count;
  CHECK(total == 1000);
  CHECK(bins.size() > 180);
  const double mean = sum_y / 1000.0;
  const double sd = std::sqrt(sum_y2 / 1000.0 - mean * mean);
  std::size_t within = 0;
  for (const auto& b : bins) {
    CHECK(std::fabs(b.mean - mean) <= 3.0 * sd);
    if (std::fabs(b.mean - mean) <= 3.0 * sd / std::sqrt(static_cast<double>(b.count))) ++within;
  }
  CHECK(static_cast<double>(within) >= 0.97 * static_cast<double>(bins.size()));
  // Mean count per occupied bin near 5.
  CHECK(1000.0 / static_cast<double>(bins.size()) == doctest::Approx(5.0).epsilon(0.15));
}

TEST_CASE("bin_points conserves mass and means") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(400);
    std::vector<Point> pts;
    double total_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back({std::round(rng.uniform() * 50.0) / 10.0, rng.uniform()});
      total_y += pts.back().y;
    }
    const auto bins = bin_points(pts, 1 + rng.index(250));
    std::size_t count = 0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      count += bins[i].count;
      weighted += bins[i].mean * static_cast<double>(bins[i].count);
      if (i > 0) REQUIRE(bins[i].index > bins[i - 1].index);
    }
    REQUIRE(count == n);
    REQUIRE(weighted == doctest::Approx(total_y).epsilon(1e-9));
  }
}

TEST_CASE("rolling_mean") {
  SUBCASE("constant series is unchanged") {
    const std::vector<double> ys(77, 2.5);
    for (double y : rolling_mean(ys, 30)) CHECK(y == doctest::Approx(2.5));
  }
  SUBCASE("short series keeps its length") {
    const std::vector<double> ys{1, 2, 3, 4, 5};
    const auto out = rolling_mean(ys, 30);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == 1.0);
    CHECK(out[2] == 3.0);
    CHECK(out[4] == 5.0);
  }
  SUBCASE("impulse spreads at most 1/30 per point") {
    std::vector<double> ys(101, 0.0);
    ys[50] = 1.0;
    const auto out = rolling_mean(ys, 30);
    double total = 0.0;
    for (double y : out) {
      CHECK(y <= 1.0 / 30.0 + 1e-15);
      total += y;
    }
    CHECK(total == doctest::Approx(1.0));
  }
  SUBCASE("matches a direct window average") {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng.index(120);
      const std::size_t w = 1 + rng.index(40);
      std::vector<double> ys(n);
      for (auto& y : ys) y = rng.normal();
      const auto out = rolling_mean(ys, w);
      const long lf = static_cast<long>(w / 2);
      const long rf = static_cast<long>(w) - 1 - lf;
      for (long i = 0; i < static_cast<long>(n); ++i) {
        long l = lf;
        long r = rf;
        if (i - l < 0 || i + r >= static_cast<long>(n)) {
          const long room = std::min(i, static_cast<long>(n) - 1 - i);
          l = r = std::min({l, r, room});
        }
        double s = 0.0;
        for (long j = i - l; j <= i + r; ++j) s += ys[static_cast<std::size_t>(j)];
        REQUIRE(out[static_cast<std::size_t>(i)] == doctest::Approx(s / static_cast<double>(l + r + 1)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("global mean preserved up to the edge bound") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 60 + rng.index(400);
      std::vector<double> ys(n);
      double max_abs = 0.0;
      for (auto& y : ys) {
        y = rng.normal() + 3.0;
        max_abs = std::max(max_abs, std::fabs(y));
      }
      const auto out = rolling_mean(ys, 30);
      const double a = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
      const double b = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
      REQUIRE(std::fabs(a - b) <= 15.0 * max_abs / static_cast<double>(n));
    }
  }
}

TEST_CASE("polyfit recovers exact polynomials") {
  SUBCASE("quartic through five samples") {
    const std::vector<double> xs{-2, -1, 0, 1, 2};
    std::vector<double> ys;
    for (double x : xs) ys.push_back(x * x * x * x - 2 * x * x + 1);
    const auto fit = polyfit(xs, ys, 4);
    const std::vector<double> truth{1, 0, -2, 0, 1};
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::fabs(fit.poly.coeffs[k] - truth[k]) <= 1e-8);
    CHECK(fit.residual_norm < 1e-10);
  }
  SUBCASE("constant") {
    const std::vector<double> xs{0.5, 1, 1.5, 2, 2.5, 3};
    const std::vector<double> ys(6, 1.75);
    const auto fit = polyfit(xs, ys, 4);
    CHECK(std::fabs(fit.poly.coeffs[0] - 1.75) < 1e-10);
    for (std::size_t k = 1; k < 5; ++k) CHECK(std::fabs(fit.poly.coeffs[k]) < 1e-10);
  }
  SUBCASE("too few distinct x") {
    CHECK_THROWS_AS(polyfit(std::vector<double>{1, 1, 2, 2, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}, 4),
                    FitError);
  }
}

TEST_CASE("polyfit agrees with the normal equations") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 6 + rng.index(200);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = 0.3 + 3.0 * rng.uniform();
      ys[i] = std::sin(xs[i]) + 0.1 * rng.normal();
    }
    const auto fit = polyfit(xs, ys, 4);
    const auto ref = normal_equations(xs, ys, 4);
    for (double x = 0.3; x <= 3.3; x += 0.25) {
      long double r = 0.0L;
      for (std::size_t k = 5; k-- > 0;) r = r * x + ref.coeffs[k];
      REQUIRE(fit.poly(x) == doctest::Approx(static_cast<double>(r)).epsilon(1e-7));
    }
  }
}

TEST_CASE("noisy quartic coefficients within five standard errors") {
  Rng rng(2718);
  const std::vector<double> truth{1.0, -0.5, 0.8, -0.3, 0.05};
  const double sigma = 0.01;
  std::vector<double> xs(500), ys(500);
  for (std::size_t i = 0; i < 500; ++i) {
    xs[i] = 0.5 + 3.0 * static_cast<double>(i) / 499.0;
    double y = 0.0;
    for (std::size_t k = 5; k-- > 0;) y = y * xs[i] + truth[k];
    ys[i] = y + sigma * rng.normal();
  }
  const auto fit = polyfit(xs, ys, 4);
  const auto ref = normal_equations(xs, ys, 4);
  for (std::size_t k = 0; k < 5; ++k) {
    const double se = sigma * std::sqrt(static_cast<double>(ref.inverse[k][k]));
    CHECK(std::fabs(fit.poly.coeffs[k] - truth[k]) <= 5.0 * se);
  }
}

TEST_CASE("real_roots") {
  // (x - 1)(x - 2)(x - 3) = x^3 - 6x^2 + 11x - 6
  const Polynomial cubic{{-6, 11, -6, 1}};
  const auto roots = real_roots(cubic, 0.0, 4.0);
  REQUIRE(roots.size() == 3);
  CHECK(roots[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(roots[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(roots[2] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(real_roots(cubic, 1.5, 2.5).size() == 1);
  CHECK(real_roots(Polynomial{{1, 0, 1}}, -5, 5).empty());
}

TEST_CASE("inflection_point") {
  SUBCASE("parabola minimum") {
    // (x - 2)^2 + 1 = x^2 - 4x + 5
    const auto inf = inflection_point(Polynomial{{5, -4, 1, 0, 0}}, 0.0, 4.0);
    CHECK(inf.flag == InflectionFlag::stationary_min);
    CHECK(std::fabs(inf.x - 2.0) <= 1e-9);
  }
  SUBCASE("increasing curve falls back to the lower edge") {
    const auto inf = inflection_point(Polynomial{{0.1, 1.0, 0.01, 0, 0.0001}}, 0.5, 3.5);
    CHECK(inf.flag == InflectionFlag::range_edge);
    CHECK(inf.x == 0.5);
  }
  SUBCASE("decreasing curve falls back to the upper edge") {
    const auto inf = inflection_point(Polynomial{{5.0, -1.0, 0, 0, 0}}, 0.5, 3.5);
    CHECK(inf.flag == InflectionFlag::range_edge);
    CHECK(inf.x == 3.5);
  }
  SUBCASE("double well takes the larger minimum") {
    // P'(x) = (x - 1)(x - 2)(x - 3), minima at 1 and 3.
    const Polynomial p{{0.0, -6.0, 11.0 / 2.0, -2.0, 0.25}};
    const auto inf = inflection_point(p, 0.0, 4.0);
    CHECK(inf.flag == InflectionFlag::stationary_min);
    CHECK(inf.x == doctest::Approx(3.0).epsilon(1e-10));
    // Dense grid: local minima of P are near 1 and 3 and the larger one wins.
    std::vector<double> minima;
    const int n = 40001;
    auto at = [&](int i) { return p(4.0 * i / (n - 1)); };
    for (int i = 1; i + 1 < n; ++i) {
      if (at(i) < at(i - 1) && at(i) <= at(i + 1)) minima.push_back(4.0 * i / (n - 1));
    }
    REQUIRE(minima.size() == 2);
    CHECK(std::fabs(minima.back() - inf.x) < 2e-4);
  }
}

TEST_CASE("fit_curve skips small facets") {
  std::vector<Point> pts{{1.0, 1.2}, {1.5, 1.7}, {2.0, 2.1}};
  const auto s = fit_curve("m", "h:20", pts, {"a", "b", "c"});
  CHECK_FALSE(s.fitted);
  CHECK(s.points.size() == 3);
  CHECK(s.inflection.flag == InflectionFlag::range_edge);
  std::ostringstream json;
  FitReport report;
  report.models["m"].emplace("h:20", s);
  write_fit_json(json, report);
  CHECK(json.str().find("fit skipped") != std::string::npos);
}

TEST_CASE("fit_curve on the diagonal recovers X=Y") {
  std::vector<Point> pts;
  std::vector<std::string> ids;
  for (int i = 0; i < 3000; ++i) {
    const double x = 0.5 + 3.0 * i / 2999.0;
    pts.push_back({x, x});
    ids.push_back(std::to_string(i));
  }
  const auto s = fit_curve("oracle", "overall", pts, ids);
  REQUIRE(s.fitted);
  for (const auto& b : s.bins) CHECK(std::fabs(s.fitted_at(b.center) - b.center) < 0.05);
  CHECK(s.inflection.flag == InflectionFlag::range_edge);
  CHECK(s.inflection.x == s.x_min);
}

TEST_CASE("compare_models") {
  std::vector<Point> diag, above, dip;
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) {
    const double x = 0.5 + 3.0 * i / 999.0;
    diag.push_back({x, x});
    above.push_back({x, x + 2.0 + (3.5 - x)});
    dip.push_back({x, x + 1.5 * std::max(0.0, 1.6 - x) * std::max(0.0, 1.6 - x) * 2.0});
    ids.push_back(std::to_string(i));
  }
  const auto oracle = fit_curve("oracle", "overall", diag, ids);
  const auto random = fit_curve("random", "overall", above, ids);
  const auto group = fit_curve("group", "overall", dip, ids);
  const CurveSeries* all[] = {&random, &group, &oracle};
  const auto rows = compare_models(all);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].model == "oracle");
  CHECK(rows[2].model == "random");
  CHECK(rows[0].mean_gap == doctest::Approx(0.0));

  SUBCASE("a model against itself ties") {
    const CurveSeries* same[] = {&oracle, &oracle};
    const auto r = compare_models(same);
    CHECK(r[0].inflection.x == r[1].inflection.x);
    CHECK(r[0].mean_gap == r[1].mean_gap);
  }
  SUBCASE("disjoint case sets") {
    std::vector<std::string> other;
    for (const auto& id : ids) other.push_back("x" + id);
    const auto elsewhere = fit_curve("other", "overall", diag, other);
    const CurveSeries* pair[] = {&oracle, &elsewhere};
    CHECK_THROWS_AS(compare_models(pair), ComparisonError);
  }
  SUBCASE("needs two models") {
    const CurveSeries* one[] = {&oracle};
    CHECK_THROWS_AS(compare_models(one), ComparisonError);
  }
}

TEST_CASE("facets_of") {
  ScoredCase row;
  row.setup = Setup::C;
  row.setting = "Age";
  row.h = 0;
  CHECK(facets_of(row) == std::vector<std::string>{"overall", "setup:C", "setting:Age (Def)", "h:0"});
  row.setup = Setup::A;
  row.h = 5;
  CHECK(facets_of(row) == std::vector<std::string>{"overall", "setup:A", "setting:Age", "h:5"});
}

TEST_CASE("fit json is deterministic and independent of row order") {
  std::vector<ScoredCase> rows;
  Rng rng(4);
  for (int i = 0; i < 400; ++i) {
    ScoredCase r;
    r.case_id = std::to_string(i);
    r.model = i % 2 ? "a" : "b";
    r.setting = "NoProxy";
    r.setup = Setup::B;
    r.h = 1 + 2 * static_cast<std::size_t>(i % 3);
    r.H = 0.5 + 3.0 * rng.uniform();
    r.CE = r.H + rng.uniform();
    rows.push_back(r);
  }
  std::ostringstream a, b;
  write_fit_json(a, fit_scores(rows));
  std::reverse(rows.begin(), rows.end());
  write_fit_json(b, fit_scores(rows));
  CHECK(a.str() == b.str());
}
