#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bxent/dataset.hpp"

namespace bxent {

/// Probability vector aligned to a case's candidate order.
using Distribution = std::vector<double>;

inline constexpr double kDefaultLogClamp = 1e-12;

/// Group frequency of each candidate: total interaction events between the
/// users and the candidate, normalized. Throws InvariantError when every
/// candidate has zero events.
Distribution target_distribution(const Dataset& dataset, std::span<const UserIndex> users,
                                 std::span<const ItemIndex> candidates);

/// Shannon entropy in nats; zero entries contribute nothing.
double entropy(std::span<const double> p);

/// Cross-entropy -sum p_i ln max(q_i, eps) in nats over entries with p_i > 0.
double cross_entropy(std::span<const double> p, std::span<const double> q, double eps = kDefaultLogClamp);

/// Rebuilds a full distribution from a ranked pick list by handing out p's
/// values in descending order: the i-th pick gets the i-th largest value,
/// the unpicked candidates (sorted by their own p descending, ties by
/// position) get the rest. The result is a permutation of p's values.
///
/// `picks` are candidate positions; duplicates or out-of-range positions
/// throw std::invalid_argument.
Distribution impose_distribution(std::span<const double> p, std::span<const std::size_t> picks);

/// Candidate positions sorted by p descending, ties by position.
std::vector<std::size_t> rank_by_probability(std::span<const double> p);

}  // namespace bxent
