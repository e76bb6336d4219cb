#include "bxent/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bxent/error.hpp"

namespace bxent {

Distribution target_distribution(const Dataset& dataset, std::span<const UserIndex> users,
                                 std::span<const ItemIndex> candidates) {
  std::vector<double> freq(candidates.size(), 0.0);
  for (UserIndex u : users) {
    const auto row = dataset.user_items(u);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto it = std::lower_bound(row.begin(), row.end(), candidates[i],
                                 [](const ItemEvents& e, ItemIndex item) { return e.item < item; });
      if (it != row.end() && it->item == candidates[i]) freq[i] += static_cast<double>(it->events);
    }
  }
  const double total = std::accumulate(freq.begin(), freq.end(), 0.0);
  if (!(total > 0.0)) throw InvariantError("target distribution has no mass: no candidate was interacted with");
  for (double& f : freq) f /= total;
  return freq;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double cross_entropy(std::span<const double> p, std::span<const double> q, double eps) {
  if (p.size() != q.size()) throw std::invalid_argument("cross_entropy: distributions differ in length");
  double ce = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) ce -= p[i] * std::log(std::max(q[i], eps));
  }
  return ce;
}

std::vector<std::size_t> rank_by_probability(std::span<const double> p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return order;
}

Distribution impose_distribution(std::span<const double> p, std::span<const std::size_t> picks) {
  if (picks.size() > p.size()) throw std::invalid_argument("impose_distribution: more picks than candidates");
  std::vector<double> values(p.begin(), p.end());
  std::sort(values.begin(), values.end(), std::greater<>());

  Distribution q(p.size(), 0.0);
  std::vector<bool> picked(p.size(), false);
  std::size_t next = 0;
  for (std::size_t pos : picks) {
    if (pos >= p.size()) throw std::invalid_argument("impose_distribution: pick out of range");
    if (picked[pos]) throw std::invalid_argument("impose_distribution: duplicate pick");
    picked[pos] = true;
    q[pos] = values[next++];
  }
  for (std::size_t pos : rank_by_probability(p)) {
    if (!picked[pos]) q[pos] = values[next++];
  }
  return q;
}

}  // namespace bxent
