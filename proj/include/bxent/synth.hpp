#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "bxent/cohort.hpp"
#include "bxent/dataset.hpp"
#include "bxent/entropy.hpp"

namespace bxent {

/// How behavior depends on who the user is.
///   weakest   - one global item distribution for everybody
///   average   - one distribution per full proxy-value combination
///   strongest - per user: (1 - lambda) * proxy distribution + lambda * own draw
enum class SynthCase { weakest, average, strongest };

std::string_view to_string(SynthCase c);
SynthCase synth_case_from_string(std::string_view text);

struct SynthSpec {
  SynthCase kind = SynthCase::average;
  std::size_t n_users = 500;
  std::size_t n_items = 200;
  std::size_t events_per_user = 100;
  /// attribute name -> number of categorical values
  std::map<std::string, std::size_t> attributes;
  /// Concentration of the symmetric Dirichlet prior behind every distribution.
  double alpha = 0.5;
  /// Weight of the user-specific component (strongest only).
  double lambda = 0.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// Every distribution used to generate a synthetic population, indexed by
/// item position in the dataset.
struct GroundTruth {
  SynthCase kind = SynthCase::weakest;
  std::vector<std::string> attributes;
  Distribution global;
  /// Keyed by the full-combination ProxyKey string.
  std::map<std::string, Distribution> per_proxy;
  /// Keyed by user id (strongest only).
  std::map<std::string, Distribution> per_user;

  /// Proxy-level distribution of one user (global for the weakest case).
  const Distribution& proxy_distribution_of(const UserProfile& user) const;

  /// Proxy-level distribution of everyone matching `key`: the user-count
  /// weighted mixture of their proxy distributions. Individual structure is
  /// deliberately ignored.
  Distribution group_distribution(const Dataset& dataset, const ProxyKey& key) const;

  void save(const std::filesystem::path& path) const;
  static GroundTruth load(const std::filesystem::path& path);
};

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
};

/// Draws a population for `spec`. Attributes are independent and uniform.
/// Each user's events are aggregated into one interaction per distinct item
/// with weight = number of draws.
SynthResult generate(const SynthSpec& spec);

/// Symmetric Dirichlet(alpha) draw of length n.
Distribution sample_dirichlet(std::size_t n, double alpha, class Rng& rng);

}  // namespace bxent
