#include "bxent/cohort.hpp"

#include <set>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

bool ProxyKey::matches(const UserProfile& user) const {
  for (const auto& [name, value] : bindings_) {
    auto it = user.attributes.find(name);
    if (it == user.attributes.end() || it->second != value) return false;
  }
  return true;
}

ProxyKey ProxyKey::with(std::string attribute, std::string value) const {
  AttributeMap copy = bindings_;
  copy[std::move(attribute)] = std::move(value);
  return ProxyKey(std::move(copy));
}

std::string ProxyKey::to_string() const {
  std::string out;
  for (const auto& [name, value] : bindings_) {
    if (!out.empty()) out += ';';
    out += name;
    out += '=';
    out += value;
  }
  return out;
}

ProxyKey ProxyKey::parse(std::string_view text) {
  AttributeMap bindings;
  if (trim(text).empty()) return ProxyKey();
  for (auto part : split(text, ";")) {
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) throw ConfigError("bad proxy binding '" + std::string(part) + "'");
    auto [it, inserted] = bindings.emplace(std::string(part.substr(0, eq)), std::string(part.substr(eq + 1)));
    if (!inserted) throw ConfigError("duplicate proxy attribute '" + it->first + "'");
  }
  return ProxyKey(std::move(bindings));
}

ProxySchema ProxySchema::movies() {
  return ProxySchema{{{"NoProxy", {}},
                      {"Age", {"age"}},
                      {"Gender", {"gender"}},
                      {"Occupation", {"occupation"}},
                      {"All", {"age", "gender", "occupation"}}}};
}

ProxySchema ProxySchema::music() {
  return ProxySchema{{{"NoProxy", {}},
                      {"Country", {"country"}},
                      {"Continent", {"region"}},
                      {"Gender", {"gender"}},
                      {"Gen&Conti", {"gender", "region"}}}};
}

ProxySchema ProxySchema::for_attributes(const std::vector<std::string>& attributes) {
  ProxySchema schema;
  schema.settings.push_back({"NoProxy", {}});
  for (const auto& a : attributes) schema.settings.push_back({a, {a}});
  if (attributes.size() > 1) schema.settings.push_back({"All", attributes});
  return schema;
}

ProxySchema ProxySchema::for_domain(Domain domain, const Dataset& dataset) {
  switch (domain) {
    case Domain::movies: return movies();
    case Domain::music: return music();
    case Domain::synthetic: {
      const auto names = dataset.attribute_names();
      return for_attributes(std::vector<std::string>(names.begin(), names.end()));
    }
  }
  return {};
}

const ProxySetting* ProxySchema::find(std::string_view name) const {
  for (const auto& s : settings) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

void ProxySchema::validate(const Dataset& dataset) const {
  std::set<std::string> names;
  const auto attributes = dataset.attribute_names();
  for (const auto& s : settings) {
    if (!names.insert(s.name).second) throw ConfigError("duplicate proxy setting '" + s.name + "'");
    std::set<std::string> seen;
    for (const auto& a : s.attributes) {
      if (!seen.insert(a).second) throw ConfigError("setting '" + s.name + "' repeats attribute '" + a + "'");
      if (!attributes.contains(a)) {
        throw ConfigError("setting '" + s.name + "' uses attribute '" + a + "' absent from the dataset");
      }
    }
  }
}

std::vector<UserIndex> group_users(const Dataset& dataset, const ProxyKey& key) {
  std::vector<UserIndex> users;
  for (UserIndex u = 0; u < dataset.user_count(); ++u) {
    if (key.matches(dataset.user(u))) users.push_back(u);
  }
  return users;
}

std::vector<SettingKeys> enumerate_settings(const ProxySchema& schema, const Dataset& dataset) {
  std::vector<SettingKeys> out;
  for (const auto& setting : schema.settings) {
    std::set<ProxyKey> keys;
    for (const auto& user : dataset.users()) {
      AttributeMap bindings;
      bool complete = true;
      for (const auto& a : setting.attributes) {
        auto it = user.attributes.find(a);
        if (it == user.attributes.end()) {
          complete = false;
          break;
        }
        bindings.emplace(a, it->second);
      }
      if (complete) keys.insert(ProxyKey(std::move(bindings)));
    }
    out.push_back(SettingKeys{setting.name, std::vector<ProxyKey>(keys.begin(), keys.end())});
  }
  return out;
}

}  // namespace bxent
