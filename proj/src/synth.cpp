#include "bxent/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bxent/error.hpp"
#include "bxent/rng.hpp"

namespace bxent {

namespace {

std::string padded(std::string_view prefix, std::size_t value, std::size_t total) {
  const std::size_t width = std::to_string(total).size();
  return fmt::format("{}{:0{}}", prefix, value, width);
}

std::size_t sample_categorical(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

}  // namespace

std::string_view to_string(SynthCase c) {
  switch (c) {
    case SynthCase::weakest: return "weakest";
    case SynthCase::average: return "average";
    case SynthCase::strongest: return "strongest";
  }
  return "weakest";
}

SynthCase synth_case_from_string(std::string_view text) {
  if (text == "weakest") return SynthCase::weakest;
  if (text == "average") return SynthCase::average;
  if (text == "strongest") return SynthCase::strongest;
  throw ConfigError("unknown synthetic case '" + std::string(text) + "'");
}

void SynthSpec::validate() const {
  if (n_users == 0 || n_items == 0 || events_per_user == 0) {
    throw ConfigError("synthetic n_users, n_items and events_per_user must be positive");
  }
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("synthetic alpha must be a positive number");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("synthetic lambda must lie in [0, 1]");
  if (kind == SynthCase::strongest && !(lambda > 0.0)) throw ConfigError("the strongest case needs lambda > 0");
  if (kind != SynthCase::weakest && attributes.empty()) {
    throw ConfigError("the average and strongest cases need at least one attribute");
  }
  for (const auto& [name, values] : attributes) {
    if (name.empty() || values == 0) throw ConfigError("synthetic attributes need a name and >= 1 value");
  }
}

Distribution sample_dirichlet(std::size_t n, double alpha, Rng& rng) {
  std::vector<double> logs(n);
  for (auto& l : logs) l = rng.log_gamma_variate(alpha);
  const double top = *std::max_element(logs.begin(), logs.end());
  Distribution p(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::exp(logs[i] - top);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

const Distribution& GroundTruth::proxy_distribution_of(const UserProfile& user) const {
  if (per_proxy.empty()) return global;
  AttributeMap combo;
  for (const auto& a : attributes) {
    auto it = user.attributes.find(a);
    if (it != user.attributes.end()) combo.emplace(a, it->second);
  }
  auto it = per_proxy.find(ProxyKey(std::move(combo)).to_string());
  if (it == per_proxy.end()) throw InvariantError("user " + user.id + " has no proxy distribution");
  return it->second;
}

Distribution GroundTruth::group_distribution(const Dataset& dataset, const ProxyKey& key) const {
  Distribution mix(dataset.item_count(), 0.0);
  std::map<const Distribution*, std::size_t> weights;
  for (UserIndex u : group_users(dataset, key)) ++weights[&proxy_distribution_of(dataset.user(u))];
  std::size_t total = 0;
  for (const auto& [dist, count] : weights) {
    if (dist->size() != mix.size()) throw InvariantError("ground truth does not match the dataset inventory");
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] += static_cast<double>(count) * (*dist)[i];
    total += count;
  }
  if (total == 0) return mix;
  for (double& x : mix) x /= static_cast<double>(total);
  return mix;
}

void GroundTruth::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["case"] = to_string(kind);
  j["attributes"] = attributes;
  j["global"] = global;
  j["per_proxy"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : per_proxy) j["per_proxy"][k] = v;
  j["per_user"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : per_user) j["per_user"][k] = v;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write ground truth", path.string());
  out << j.dump() << '\n';
}

GroundTruth GroundTruth::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing or unreadable ground truth", path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    GroundTruth t;
    t.kind = synth_case_from_string(j.at("case").get<std::string>());
    t.attributes = j.at("attributes").get<std::vector<std::string>>();
    t.global = j.at("global").get<Distribution>();
    for (const auto& [k, v] : j.at("per_proxy").items()) t.per_proxy.emplace(k, v.get<Distribution>());
    for (const auto& [k, v] : j.at("per_user").items()) t.per_user.emplace(k, v.get<Distribution>());
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed ground truth: ") + e.what(), path.string());
  }
}

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  GroundTruth truth;
  truth.kind = spec.kind;
  for (const auto& [name, n] : spec.attributes) truth.attributes.push_back(name);

  DatasetBuilder builder(fmt::format("synthetic-{}", to_string(spec.kind)), Domain::synthetic);
  for (std::size_t i = 0; i < spec.n_items; ++i) {
    builder.add_item(padded("i", i + 1, spec.n_items), padded("Item ", i + 1, spec.n_items));
  }

  Rng shared(Rng::derive(spec.seed, 0));
  truth.global = sample_dirichlet(spec.n_items, spec.alpha, shared);
  if (spec.kind != SynthCase::weakest) {
    // Odometer over value indices; the last attribute varies fastest.
    std::vector<std::size_t> digits(truth.attributes.size(), 0);
    bool done = false;
    while (!done) {
      AttributeMap combo;
      for (std::size_t a = 0; a < digits.size(); ++a) {
        combo.emplace(truth.attributes[a], fmt::format("v{}", digits[a]));
      }
      truth.per_proxy.emplace(ProxyKey(std::move(combo)).to_string(),
                              sample_dirichlet(spec.n_items, spec.alpha, shared));
      done = true;
      for (std::size_t a = digits.size(); a-- > 0;) {
        if (++digits[a] < spec.attributes.at(truth.attributes[a])) {
          done = false;
          break;
        }
        digits[a] = 0;
      }
    }
  }

  std::vector<double> cumulative(spec.n_items);
  std::vector<std::uint32_t> counts(spec.n_items);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    Rng rng(Rng::derive(spec.seed, u + 1));
    AttributeMap attributes;
    for (const auto& [name, n_values] : spec.attributes) {
      attributes.emplace(name, fmt::format("v{}", rng.index(n_values)));
    }
    const std::string user_id = padded("u", u + 1, spec.n_users);
    const UserIndex user = builder.add_user(user_id, attributes);

    const Distribution* dist = &truth.global;
    if (spec.kind != SynthCase::weakest) {
      dist = &truth.per_proxy.at(ProxyKey(attributes).to_string());
    }
    if (spec.kind == SynthCase::strongest) {
      const auto own = sample_dirichlet(spec.n_items, spec.alpha, rng);
      Distribution mixed(spec.n_items);
      for (std::size_t i = 0; i < spec.n_items; ++i) {
        mixed[i] = (1.0 - spec.lambda) * (*dist)[i] + spec.lambda * own[i];
      }
      dist = &truth.per_user.emplace(user_id, std::move(mixed)).first->second;
    }
    std::partial_sum(dist->begin(), dist->end(), cumulative.begin());
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t e = 0; e < spec.events_per_user; ++e) ++counts[sample_categorical(cumulative, rng)];
    for (std::size_t i = 0; i < spec.n_items; ++i) {
      if (counts[i] > 0) builder.add_interaction(user, static_cast<ItemIndex>(i), kNoTimestamp, counts[i]);
    }
  }
  return SynthResult{std::move(builder).build(), std::move(truth)};
}

}  // namespace bxent
