#include "bxent/dataset.hpp"

#include <algorithm>

#include "bxent/error.hpp"
#include "bxent/hash.hpp"

namespace bxent {

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::movies: return "movies";
    case Domain::music: return "music";
    case Domain::synthetic: return "synthetic";
  }
  return "synthetic";
}

Domain domain_from_string(std::string_view text) {
  if (text == "movies" || text == "movie") return Domain::movies;
  if (text == "music") return Domain::music;
  if (text == "synthetic") return Domain::synthetic;
  throw ConfigError("unknown domain: " + std::string(text));
}

std::optional<ItemIndex> Dataset::find_item(const std::string& id) const {
  auto it = item_lookup_.find(id);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<UserIndex> Dataset::find_user(const std::string& id) const {
  auto it = user_lookup_.find(id);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const ItemEvents> Dataset::user_items(UserIndex user) const {
  const std::size_t begin = user_offsets_.at(user);
  const std::size_t end = user_offsets_.at(user + 1);
  return std::span<const ItemEvents>(user_item_events_).subspan(begin, end - begin);
}

bool Dataset::user_has_item(UserIndex user, ItemIndex item) const {
  auto row = user_items(user);
  auto it = std::lower_bound(row.begin(), row.end(), item,
                             [](const ItemEvents& e, ItemIndex i) { return e.item < i; });
  return it != row.end() && it->item == item;
}

std::set<std::string> Dataset::attribute_names() const {
  std::set<std::string> names;
  for (const auto& user : users_) {
    for (const auto& [name, value] : user.attributes) names.insert(name);
  }
  return names;
}

std::unordered_map<std::string, std::string> Dataset::title_map() const {
  std::unordered_map<std::string, std::string> titles;
  titles.reserve(items_.size());
  for (const auto& item : items_) titles.emplace(item.id, item.title);
  return titles;
}

DatasetBuilder::DatasetBuilder(std::string name, Domain domain)
    : name_(std::move(name)), domain_(domain) {}

ItemIndex DatasetBuilder::add_item(std::string id, std::string title) {
  if (title.empty()) throw InputError("item '" + id + "' has an empty title");
  const auto index = static_cast<ItemIndex>(items_.size());
  auto [it, inserted] = item_lookup_.emplace(id, index);
  if (!inserted) throw InputError("duplicate item id '" + id + "'");
  items_.push_back(Item{std::move(id), std::move(title)});
  return index;
}

UserIndex DatasetBuilder::add_user(std::string id, AttributeMap attributes) {
  const auto index = static_cast<UserIndex>(users_.size());
  auto [it, inserted] = user_lookup_.emplace(id, index);
  if (!inserted) throw InputError("duplicate user id '" + id + "'");
  users_.push_back(UserProfile{std::move(id), std::move(attributes)});
  return index;
}

void DatasetBuilder::add_interaction(UserIndex user, ItemIndex item, std::int64_t timestamp,
                                     std::uint32_t weight) {
  if (user >= users_.size()) throw InputError("interaction references an unknown user");
  if (item >= items_.size()) throw InputError("interaction references an unknown item");
  if (weight == 0) throw InputError("interaction weight must be >= 1");
  interactions_.push_back(Interaction{user, item, timestamp, weight});
}

std::optional<ItemIndex> DatasetBuilder::find_item(const std::string& id) const {
  auto it = item_lookup_.find(id);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<UserIndex> DatasetBuilder::find_user(const std::string& id) const {
  auto it = user_lookup_.find(id);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

Dataset DatasetBuilder::build() && {
  Dataset d;
  d.name_ = std::move(name_);
  d.domain_ = domain_;
  d.preprocessing_ = std::move(preprocessing_);
  d.items_ = std::move(items_);
  d.users_ = std::move(users_);
  d.interactions_ = std::move(interactions_);
  d.item_lookup_ = std::move(item_lookup_);
  d.user_lookup_ = std::move(user_lookup_);

  const std::size_t n_users = d.users_.size();
  d.user_events_.assign(n_users, 0);
  d.item_events_.assign(d.items_.size(), 0);

  // Bucket interactions by user, then sort and merge each bucket by item.
  std::vector<std::size_t> counts(n_users + 1, 0);
  for (const auto& x : d.interactions_) ++counts[x.user + 1];
  for (std::size_t u = 0; u < n_users; ++u) counts[u + 1] += counts[u];
  std::vector<ItemEvents> bucketed(d.interactions_.size());
  {
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (const auto& x : d.interactions_) {
      bucketed[cursor[x.user]++] = ItemEvents{x.item, x.weight};
      d.user_events_[x.user] += x.weight;
      d.item_events_[x.item] += x.weight;
    }
  }
  d.user_offsets_.assign(n_users + 1, 0);
  d.user_item_events_.reserve(bucketed.size());
  for (std::size_t u = 0; u < n_users; ++u) {
    auto first = bucketed.begin() + static_cast<std::ptrdiff_t>(counts[u]);
    auto last = bucketed.begin() + static_cast<std::ptrdiff_t>(counts[u + 1]);
    std::sort(first, last, [](const ItemEvents& a, const ItemEvents& b) { return a.item < b.item; });
    for (auto it = first; it != last; ++it) {
      if (!d.user_item_events_.empty() && d.user_item_events_.size() > d.user_offsets_[u] &&
          d.user_item_events_.back().item == it->item) {
        d.user_item_events_.back().events += it->events;
      } else {
        d.user_item_events_.push_back(*it);
      }
    }
    d.user_offsets_[u + 1] = d.user_item_events_.size();
  }
  d.user_item_events_.shrink_to_fit();

  StableHasher hasher;
  hasher.add(to_string(d.domain_));
  hasher.add(static_cast<std::uint64_t>(d.items_.size()));
  for (const auto& item : d.items_) hasher.add(item.id).add(item.title);
  hasher.add(static_cast<std::uint64_t>(n_users));
  for (const auto& user : d.users_) {
    hasher.add(user.id);
    for (const auto& [k, v] : user.attributes) hasher.add(k).add(v);
    hasher.add(std::string_view("\x1e", 1));
  }
  hasher.add(static_cast<std::uint64_t>(d.interactions_.size()));
  for (const auto& x : d.interactions_) {
    hasher.add(static_cast<std::uint64_t>(x.user)).add(static_cast<std::uint64_t>(x.item));
    hasher.add(static_cast<std::uint64_t>(x.timestamp)).add(static_cast<std::uint64_t>(x.weight));
  }
  d.fingerprint_ = hasher.digest();
  return d;
}

}  // namespace bxent
