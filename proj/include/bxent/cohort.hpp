#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bxent/dataset.hpp"

namespace bxent {

/// Conjunction of attribute = value bindings. The empty key matches everyone.
class ProxyKey {
 public:
  ProxyKey() = default;
  explicit ProxyKey(AttributeMap bindings) : bindings_(std::move(bindings)) {}

  const AttributeMap& bindings() const noexcept { return bindings_; }
  bool empty() const noexcept { return bindings_.empty(); }
  bool matches(const UserProfile& user) const;

  /// Returns a copy with one more binding (replacing an existing one).
  ProxyKey with(std::string attribute, std::string value) const;

  /// "age=25-34;gender=F"; the empty key renders as "".
  std::string to_string() const;
  static ProxyKey parse(std::string_view text);

  friend bool operator==(const ProxyKey&, const ProxyKey&) = default;
  friend auto operator<=>(const ProxyKey& a, const ProxyKey& b) { return a.bindings_ <=> b.bindings_; }

 private:
  AttributeMap bindings_;
};

struct ProxySetting {
  std::string name;
  std::vector<std::string> attributes;
};

struct ProxySchema {
  std::vector<ProxySetting> settings;

  /// NoProxy, Age, Gender, Occupation, All.
  static ProxySchema movies();
  /// NoProxy, Country, Continent, Gender, Gen&Conti.
  static ProxySchema music();
  /// NoProxy, one setting per attribute, and All.
  static ProxySchema for_attributes(const std::vector<std::string>& attributes);
  static ProxySchema for_domain(Domain domain, const Dataset& dataset);

  const ProxySetting* find(std::string_view name) const;
  /// Throws ConfigError on duplicate names or attributes absent from the dataset.
  void validate(const Dataset& dataset) const;
};

struct SettingKeys {
  std::string name;
  std::vector<ProxyKey> keys;
};

/// Users matching every binding of the key, as sorted user indices.
std::vector<UserIndex> group_users(const Dataset& dataset, const ProxyKey& key);

/// One key per observed value combination of each setting's attributes,
/// in lexicographic order. Combinations with no users never appear.
std::vector<SettingKeys> enumerate_settings(const ProxySchema& schema, const Dataset& dataset);

}  // namespace bxent
