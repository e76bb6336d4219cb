#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bxent {

enum class Domain { movies, music, synthetic };

std::string_view to_string(Domain domain);
Domain domain_from_string(std::string_view text);

using ItemIndex = std::uint32_t;
using UserIndex = std::uint32_t;
using AttributeMap = std::map<std::string, std::string, std::less<>>;

inline constexpr std::int64_t kNoTimestamp = std::numeric_limits<std::int64_t>::min();

struct Item {
  std::string id;
  std::string title;

  friend bool operator==(const Item&, const Item&) = default;
};

struct UserProfile {
  std::string id;
  AttributeMap attributes;

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

struct Interaction {
  UserIndex user = 0;
  ItemIndex item = 0;
  std::int64_t timestamp = kNoTimestamp;
  std::uint32_t weight = 1;

  bool has_timestamp() const noexcept { return timestamp != kNoTimestamp; }
  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// One entry of a user's interacted-item set, with the summed event weight.
struct ItemEvents {
  ItemIndex item = 0;
  std::uint64_t events = 0;

  friend bool operator==(const ItemEvents&, const ItemEvents&) = default;
};

/// Immutable interaction store. Built through DatasetBuilder, which derives
/// the per-user item sets so they always reflect the interaction list.
class Dataset {
 public:
  Dataset() = default;

  const std::string& name() const noexcept { return name_; }
  Domain domain() const noexcept { return domain_; }
  /// Description of the preprocessing applied ("" for raw data).
  const std::string& preprocessing() const noexcept { return preprocessing_; }

  std::span<const Item> items() const noexcept { return items_; }
  std::span<const UserProfile> users() const noexcept { return users_; }
  std::span<const Interaction> interactions() const noexcept { return interactions_; }

  std::size_t item_count() const noexcept { return items_.size(); }
  std::size_t user_count() const noexcept { return users_.size(); }

  const Item& item(ItemIndex index) const { return items_.at(index); }
  const UserProfile& user(UserIndex index) const { return users_.at(index); }

  std::optional<ItemIndex> find_item(const std::string& id) const;
  std::optional<UserIndex> find_user(const std::string& id) const;

  /// Items the user interacted with, sorted by item index.
  std::span<const ItemEvents> user_items(UserIndex user) const;
  bool user_has_item(UserIndex user, ItemIndex item) const;
  std::uint64_t user_events(UserIndex user) const { return user_events_.at(user); }
  /// Global interaction count of an item, summed over all users.
  std::uint64_t item_events(ItemIndex item) const { return item_events_.at(item); }

  /// Union of attribute names over all user profiles.
  std::set<std::string> attribute_names() const;

  /// Stable hash of the canonical content (items, users, interactions).
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }

  std::unordered_map<std::string, std::string> title_map() const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.name_ == b.name_ && a.domain_ == b.domain_ && a.items_ == b.items_ &&
           a.users_ == b.users_ && a.interactions_ == b.interactions_;
  }

 private:
  friend class DatasetBuilder;

  std::string name_;
  Domain domain_ = Domain::synthetic;
  std::string preprocessing_;
  std::vector<Item> items_;
  std::vector<UserProfile> users_;
  std::vector<Interaction> interactions_;
  std::unordered_map<std::string, ItemIndex> item_lookup_;
  std::unordered_map<std::string, UserIndex> user_lookup_;
  std::vector<std::size_t> user_offsets_;
  std::vector<ItemEvents> user_item_events_;
  std::vector<std::uint64_t> user_events_;
  std::vector<std::uint64_t> item_events_;
  std::uint64_t fingerprint_ = 0;
};

class DatasetBuilder {
 public:
  DatasetBuilder(std::string name, Domain domain);

  void set_preprocessing(std::string description) { preprocessing_ = std::move(description); }

  /// Throws InputError on a duplicate id or an empty title.
  ItemIndex add_item(std::string id, std::string title);
  /// Throws InputError on a duplicate id.
  UserIndex add_user(std::string id, AttributeMap attributes);
  /// Throws InputError on out-of-range indices or weight 0.
  void add_interaction(UserIndex user, ItemIndex item, std::int64_t timestamp = kNoTimestamp,
                       std::uint32_t weight = 1);

  std::optional<ItemIndex> find_item(const std::string& id) const;
  std::optional<UserIndex> find_user(const std::string& id) const;
  std::size_t item_count() const noexcept { return items_.size(); }
  std::size_t user_count() const noexcept { return users_.size(); }
  std::size_t interaction_count() const noexcept { return interactions_.size(); }
  void reserve_interactions(std::size_t n) { interactions_.reserve(n); }

  Dataset build() &&;

 private:
  std::string name_;
  Domain domain_;
  std::string preprocessing_;
  std::vector<Item> items_;
  std::vector<UserProfile> users_;
  std::vector<Interaction> interactions_;
  std::unordered_map<std::string, ItemIndex> item_lookup_;
  std::unordered_map<std::string, UserIndex> user_lookup_;
};

}  // namespace bxent
