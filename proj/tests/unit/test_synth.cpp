#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bxent/error.hpp"
#include "bxent/rng.hpp"
#include "bxent/synth.hpp"
#include "fixtures.hpp"

using namespace bxent;

namespace {

SynthSpec base_spec(SynthCase kind) {
  SynthSpec s;
  s.kind = kind;
  s.n_users = 120;
  s.n_items = 40;
  s.events_per_user = 50;
  s.attributes = {{"a", 2}, {"b", 3}};
  s.alpha = 0.4;
  s.lambda = kind == SynthCase::strongest ? 0.6 : 0.0;
  s.seed = 17;
  return s;
}

double sum(const Distribution& d) { return std::accumulate(d.begin(), d.end(), 0.0); }

}  // namespace

TEST_CASE("dirichlet draws match the first two moments") {
  Rng rng(3);
  const std::size_t n = 5;
  const double alpha = 0.7;
  const int draws = 20000;
  std::vector<double> mean(n), sq(n);
  for (int t = 0; t < draws; ++t) {
    const auto d = sample_dirichlet(n, alpha, rng);
    REQUIRE(sum(d) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(d[i] >= 0.0);
      mean[i] += d[i] / draws;
      sq[i] += d[i] * d[i] / draws;
    }
  }
  const double m = 1.0 / n;
  const double var = m * (1 - m) / (n * alpha + 1);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(mean[i] - m) < 5 * std::sqrt(var / draws));
    CHECK(sq[i] - mean[i] * mean[i] == doctest::Approx(var).epsilon(0.05));
  }
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  const auto spec = base_spec(SynthCase::average);
  const auto a = generate(spec);
  const auto b = generate(spec);
  CHECK(a.dataset.fingerprint() == b.dataset.fingerprint());
  CHECK(a.truth.per_proxy == b.truth.per_proxy);
  auto other = spec;
  other.seed = 18;
  CHECK(generate(other).dataset.fingerprint() != a.dataset.fingerprint());
}

TEST_CASE("population shape") {
  for (auto kind : {SynthCase::weakest, SynthCase::average, SynthCase::strongest}) {
    auto spec = base_spec(kind);
    if (kind == SynthCase::weakest) spec.attributes = {{"a", 2}};
    const auto r = generate(spec);
    CHECK(r.dataset.domain() == Domain::synthetic);
    REQUIRE(r.dataset.user_count() == spec.n_users);
    REQUIRE(r.dataset.item_count() == spec.n_items);
    CHECK(r.dataset.item(0).id == "i01");
    CHECK(r.dataset.item(0).title == "Item 01");
    for (UserIndex u = 0; u < r.dataset.user_count(); ++u) {
      REQUIRE(r.dataset.user_events(u) == spec.events_per_user);
      for (const auto& [name, values] : spec.attributes) {
        const auto& v = r.dataset.user(u).attributes.at(name);
        REQUIRE(v.size() >= 2);
        REQUIRE(std::stoul(v.substr(1)) < values);
      }
    }
    CHECK(sum(r.truth.global) == doctest::Approx(1.0));
    if (kind == SynthCase::weakest) {
      CHECK(r.truth.per_proxy.empty());
      CHECK(&r.truth.proxy_distribution_of(r.dataset.user(0)) == &r.truth.global);
    } else {
      CHECK(r.truth.per_proxy.size() == 6);
    }
    CHECK(r.truth.per_user.empty() == (kind != SynthCase::strongest));
  }
}

TEST_CASE("strongest users mix their proxy distribution with their own") {
  const auto spec = base_spec(SynthCase::strongest);
  const auto r = generate(spec);
  for (const auto& user : r.dataset.users()) {
    const auto& own = r.truth.per_user.at(user.id);
    const auto& proxy = r.truth.proxy_distribution_of(user);
    REQUIRE(sum(own) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < own.size(); ++i) REQUIRE(own[i] >= (1 - spec.lambda) * proxy[i] - 1e-15);
  }
}

TEST_CASE("group distribution is the user-weighted mixture") {
  const auto r = generate(base_spec(SynthCase::average));
  const ProxyKey key(AttributeMap{{"a", "v1"}});
  Distribution expected(r.dataset.item_count(), 0.0);
  std::size_t members = 0;
  for (const auto& user : r.dataset.users()) {
    if (user.attributes.at("a") != "v1") continue;
    ++members;
    const auto& d = r.truth.per_proxy.at(ProxyKey(user.attributes).to_string());
    for (std::size_t i = 0; i < d.size(); ++i) expected[i] += d[i];
  }
  REQUIRE(members > 0);
  for (auto& x : expected) x /= static_cast<double>(members);
  const auto got = r.truth.group_distribution(r.dataset, key);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("observed frequencies follow the generating distribution") {
  auto spec = base_spec(SynthCase::weakest);
  spec.attributes.clear();
  spec.n_users = 400;
  spec.n_items = 10;
  spec.alpha = 2.0;
  const auto r = generate(spec);
  std::vector<double> counts(spec.n_items, 0.0);
  for (const auto& x : r.dataset.interactions()) counts[x.item] += x.weight;
  const double total = static_cast<double>(spec.n_users * spec.events_per_user);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    const double e = total * r.truth.global[i];
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  // 9 degrees of freedom; 0.999 quantile is about 27.9.
  CHECK(chi2 < 27.9);
}

TEST_CASE("ground truth JSON round-trips") {
  const auto r = generate(base_spec(SynthCase::strongest));
  testing::TempDir dir;
  r.truth.save(dir / "truth.json");
  const auto back = GroundTruth::load(dir / "truth.json");
  CHECK(back.kind == r.truth.kind);
  CHECK(back.attributes == r.truth.attributes);
  CHECK(back.global == r.truth.global);
  CHECK(back.per_proxy == r.truth.per_proxy);
  CHECK(back.per_user == r.truth.per_user);
  CHECK_THROWS_AS(GroundTruth::load(dir / "nope.json"), InputError);
}

TEST_CASE("invalid specs are rejected") {
  auto s = base_spec(SynthCase::average);
  s.alpha = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = base_spec(SynthCase::strongest);
  s.lambda = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.lambda = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = base_spec(SynthCase::average);
  s.attributes.clear();
  CHECK_THROWS_AS(generate(s), ConfigError);
  s = base_spec(SynthCase::average);
  s.n_items = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(synth_case_from_string("strongest") == SynthCase::strongest);
  CHECK_THROWS_AS(synth_case_from_string("medium"), ConfigError);
}
