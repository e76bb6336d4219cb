#include "bxent/ingest.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace fs = std::filesystem;

namespace {

std::ifstream open_required(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing input file", path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("unreadable input file", path.string());
  return in;
}

std::string movielens_age_label(std::int64_t code) {
  switch (code) {
    case 1: return "Under 18";
    case 18: return "18-24";
    case 25: return "25-34";
    case 35: return "35-44";
    case 45: return "45-49";
    case 50: return "50-55";
    case 56: return "56+";
    default: throw std::invalid_argument(fmt::format("unknown age code {}", code));
  }
}

constexpr std::array<std::string_view, 21> kOccupations = {
    "other",          "academic/educator",  "artist",          "clerical/admin",
    "college/grad student", "customer service", "doctor/health care", "executive/managerial",
    "farmer",         "homemaker",          "K-12 student",    "lawyer",
    "programmer",     "retired",            "sales/marketing", "scientist",
    "self-employed",  "technician/engineer", "tradesman/craftsman", "unemployed",
    "writer"};

template <typename Fn>
void for_each_row(const fs::path& path, Fn&& fn) {
  auto in = open_required(path);
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      fn(std::string_view(line), line_no);
    } catch (const InputError& e) {
      if (e.line() != 0) throw;
      throw InputError(e.what(), path.string(), line_no);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what(), path.string(), line_no);
    }
  }
}

// "2009-05-04T23:08:57Z" -> seconds since epoch (UTC).
std::int64_t parse_iso8601_utc(std::string_view text) {
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':') {
    throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const year_month_day date{year{static_cast<int>(parse_int(text.substr(0, 4)))},
                            month{static_cast<unsigned>(parse_int(text.substr(5, 2)))},
                            day{static_cast<unsigned>(parse_int(text.substr(8, 2)))}};
  if (!date.ok()) throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
  const auto days = sys_days(date).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + parse_int(text.substr(11, 2)) * 3600 +
         parse_int(text.substr(14, 2)) * 60 + parse_int(text.substr(17, 2));
}

const std::map<std::string_view, std::string_view>& region_table() {
  static const std::map<std::string_view, std::string_view> table = [] {
    std::map<std::string_view, std::string_view> t;
    for (std::string_view c :
         {"Albania", "Andorra", "Austria", "Belarus", "Belgium", "Bosnia and Herzegovina", "Bulgaria",
          "Croatia", "Cyprus", "Czech Republic", "Denmark", "Estonia", "Faroe Islands", "Finland", "France",
          "Germany", "Gibraltar", "Greece", "Holy See (Vatican City State)", "Hungary", "Iceland", "Ireland",
          "Italy", "Latvia", "Liechtenstein", "Lithuania", "Luxembourg", "Macedonia", "Malta",
          "Moldova", "Monaco", "Montenegro", "Netherlands", "Norway", "Poland", "Portugal", "Romania",
          "Russian Federation", "Russia", "San Marino", "Serbia", "Slovakia", "Slovenia", "Spain", "Sweden",
          "Switzerland", "Ukraine", "Aland Islands", "Svalbard and Jan Mayen", "Isle of Man", "Jersey",
          "Guernsey"}) {
      t.emplace(c, kRegionEurope);
    }
    for (std::string_view c :
         {"United States", "Canada", "Mexico", "Greenland", "Bermuda", "Bahamas", "Belize", "Costa Rica",
          "Cuba", "Dominica", "Dominican Republic", "El Salvador", "Guatemala", "Haiti", "Honduras",
          "Jamaica", "Nicaragua", "Panama", "Puerto Rico", "Trinidad and Tobago", "Barbados",
          "Antigua and Barbuda", "Saint Lucia", "Grenada", "Saint Kitts and Nevis",
          "Saint Vincent and the Grenadines", "Cayman Islands", "Virgin Islands, U.S.",
          "Virgin Islands, British", "Netherlands Antilles", "United States Minor Outlying Islands",
          "Saint Pierre and Miquelon"}) {
      t.emplace(c, kRegionNorthAmerica);
    }
    for (std::string_view c : {"Argentina", "Bolivia", "Brazil", "Chile", "Colombia", "Ecuador",
                               "Falkland Islands (Malvinas)", "French Guiana", "Guyana", "Paraguay", "Peru",
                               "Suriname", "Uruguay", "Venezuela"}) {
      t.emplace(c, kRegionSouthAmerica);
    }
    t.emplace("United Kingdom", kRegionUnitedKingdom);
    return t;
  }();
  return table;
}

}  // namespace

void SkipReport::write(std::ostream& out) const {
  for (const auto& e : entries) out << e.file << ':' << e.line << '\t' << e.reason << '\n';
}

Dataset parse_movielens(const fs::path& dir) {
  const auto users_path = dir / "users.dat";
  const auto movies_path = dir / "movies.dat";
  const auto ratings_path = dir / "ratings.dat";
  for (const auto& p : {users_path, movies_path, ratings_path}) {
    if (!fs::exists(p)) throw InputError("missing input file", p.string());
  }

  DatasetBuilder builder("movielens-1m", Domain::movies);
  for_each_row(users_path, [&](std::string_view line, std::size_t) {
    auto f = split(line, "::");
    if (f.size() != 5) throw InputError(fmt::format("expected 5 fields, found {}", f.size()));
    const std::string gender(trim(f[1]));
    if (gender != "M" && gender != "F") throw InputError("gender must be M or F, got '" + gender + "'");
    const auto occupation = parse_int(f[3]);
    if (occupation < 0 || occupation >= static_cast<std::int64_t>(kOccupations.size())) {
      throw InputError(fmt::format("unknown occupation code {}", occupation));
    }
    AttributeMap attributes{{"gender", gender},
                            {"age", movielens_age_label(parse_int(f[2]))},
                            {"occupation", std::string(kOccupations[static_cast<std::size_t>(occupation)])}};
    builder.add_user(std::string(trim(f[0])), std::move(attributes));
  });
  for_each_row(movies_path, [&](std::string_view line, std::size_t) {
    auto f = split(line, "::");
    if (f.size() < 3) throw InputError(fmt::format("expected 3 fields, found {}", f.size()));
    std::string title(f[1]);
    for (std::size_t i = 2; i + 1 < f.size(); ++i) title += "::" + std::string(f[i]);
    builder.add_item(std::string(trim(f[0])), ensure_utf8(title));
  });
  builder.reserve_interactions(1'000'209);
  std::string key;
  for_each_row(ratings_path, [&](std::string_view line, std::size_t) {
    auto f = split(line, "::");
    if (f.size() != 4) throw InputError(fmt::format("expected 4 fields, found {}", f.size()));
    key.assign(trim(f[0]));
    auto user = builder.find_user(key);
    if (!user) throw InputError("rating references unknown user '" + key + "'");
    key.assign(trim(f[1]));
    auto item = builder.find_item(key);
    if (!item) throw InputError("rating references unknown movie '" + key + "'");
    parse_int(f[2]);
    builder.add_interaction(*user, *item, parse_int(f[3]), 1);
  });
  return std::move(builder).build();
}

Dataset parse_lastfm(const fs::path& dir, SkipReport* skipped) {
  const auto profile_path = dir / "userid-profile.tsv";
  const auto log_path = dir / "userid-timestamp-artid-artname-traid-traname.tsv";
  for (const auto& p : {profile_path, log_path}) {
    if (!fs::exists(p)) throw InputError("missing input file", p.string());
  }

  DatasetBuilder builder("lastfm-1k", Domain::music);
  for_each_row(profile_path, [&](std::string_view line, std::size_t) {
    if (line.starts_with("#")) return;
    auto f = split(line, "\t");
    if (f.size() < 4) throw InputError(fmt::format("expected at least 4 fields, found {}", f.size()));
    AttributeMap attributes;
    const auto gender = trim(f[1]);
    if (gender == "m" || gender == "M") attributes.emplace("gender", "M");
    else if (gender == "f" || gender == "F") attributes.emplace("gender", "F");
    else if (!gender.empty()) throw InputError("gender must be m or f, got '" + std::string(gender) + "'");
    if (auto age = trim(f[2]); !age.empty()) attributes.emplace("age", std::string(age));
    if (auto country = trim(f[3]); !country.empty()) attributes.emplace("country", ensure_utf8(country));
    builder.add_user(std::string(trim(f[0])), std::move(attributes));
  });

  std::unordered_map<std::string, ItemIndex> by_title;
  std::string user_key;
  std::string title;
  for_each_row(log_path, [&](std::string_view line, std::size_t line_no) {
    auto f = split(line, "\t");
    if (f.size() != 6) throw InputError(fmt::format("expected 6 fields, found {}", f.size()));
    if (trim(f[5]).empty()) {
      if (skipped) skipped->entries.push_back({log_path.filename().string(), line_no, "empty track name"});
      return;
    }
    user_key.assign(trim(f[0]));
    auto user = builder.find_user(user_key);
    if (!user) throw InputError("play references unknown user '" + user_key + "'");
    const auto ts = parse_iso8601_utc(trim(f[1]));
    title = ensure_utf8(f[3]);
    title += " - ";
    title += ensure_utf8(f[5]);
    auto it = by_title.find(title);
    ItemIndex item = 0;
    if (it == by_title.end()) {
      item = builder.add_item(fmt::format("t{}", builder.item_count() + 1), title);
      by_title.emplace(title, item);
    } else {
      item = it->second;
    }
    builder.add_interaction(*user, item, ts, 1);
  });
  return std::move(builder).build();
}

std::string derive_region(std::string_view country) {
  const auto& table = region_table();
  auto it = table.find(trim(country));
  return std::string(it == table.end() ? kRegionOther : it->second);
}

PreprocessRules PreprocessRules::movies() {
  PreprocessRules rules;
  rules.drop_occupations = {"other"};
  rules.group_attributes = {"age", "gender", "occupation"};
  rules.min_group_users = 30;
  return rules;
}

PreprocessRules PreprocessRules::music() {
  PreprocessRules rules;
  rules.add_region = true;
  rules.keep_regions = {std::string(kRegionEurope), std::string(kRegionNorthAmerica),
                        std::string(kRegionSouthAmerica), std::string(kRegionUnitedKingdom)};
  rules.min_user_events = 5000;
  return rules;
}

bool PreprocessRules::empty() const {
  return drop_occupations.empty() && (group_attributes.empty() || min_group_users <= 1) && !add_region &&
         keep_regions.empty() && min_user_events == 0;
}

std::string PreprocessRules::describe() const {
  if (empty()) return "";
  std::string out;
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
  };
  if (!drop_occupations.empty()) out += "drop_occupations=" + join(drop_occupations) + ";";
  if (!group_attributes.empty() && min_group_users > 1) {
    out += fmt::format("min_group_users[{}]={};", join(group_attributes), min_group_users);
  }
  if (add_region) out += "add_region;";
  if (!keep_regions.empty()) out += "keep_regions=" + join(keep_regions) + ";";
  if (min_user_events > 0) out += fmt::format("min_user_events={};", min_user_events);
  return out;
}

Dataset preprocess(const Dataset& dataset, const PreprocessRules& rules) {
  const std::size_t n_users = dataset.user_count();
  std::vector<AttributeMap> attributes(n_users);
  std::vector<bool> keep(n_users, true);
  for (UserIndex u = 0; u < n_users; ++u) {
    attributes[u] = dataset.user(u).attributes;
    if (rules.add_region) {
      auto it = attributes[u].find("country");
      attributes[u]["region"] = derive_region(it == attributes[u].end() ? "" : it->second);
    }
  }

  for (UserIndex u = 0; u < n_users; ++u) {
    const auto& attrs = attributes[u];
    if (!rules.drop_occupations.empty()) {
      auto it = attrs.find("occupation");
      if (it != attrs.end() && std::find(rules.drop_occupations.begin(), rules.drop_occupations.end(),
                                         it->second) != rules.drop_occupations.end()) {
        keep[u] = false;
      }
    }
    if (!rules.keep_regions.empty()) {
      auto it = attrs.find("region");
      if (it == attrs.end() ||
          std::find(rules.keep_regions.begin(), rules.keep_regions.end(), it->second) == rules.keep_regions.end()) {
        keep[u] = false;
      }
    }
    if (dataset.user_events(u) < rules.min_user_events) keep[u] = false;
  }

  // Group-size filter: single pass over the users that survived the other predicates.
  if (!rules.group_attributes.empty() && rules.min_group_users > 1) {
    std::map<std::vector<std::string>, std::size_t> sizes;
    std::vector<std::optional<std::vector<std::string>>> group_of(n_users);
    for (UserIndex u = 0; u < n_users; ++u) {
      if (!keep[u]) continue;
      std::vector<std::string> group;
      for (const auto& name : rules.group_attributes) {
        auto it = attributes[u].find(name);
        if (it == attributes[u].end()) break;
        group.push_back(it->second);
      }
      if (group.size() != rules.group_attributes.size()) {
        keep[u] = false;
        continue;
      }
      ++sizes[group];
      group_of[u] = std::move(group);
    }
    for (UserIndex u = 0; u < n_users; ++u) {
      if (keep[u] && sizes[*group_of[u]] < rules.min_group_users) keep[u] = false;
    }
  }

  DatasetBuilder builder(dataset.name(), dataset.domain());
  std::string description = dataset.preprocessing();
  if (description.find(rules.describe()) == std::string::npos) description += rules.describe();
  builder.set_preprocessing(description);
  for (const auto& item : dataset.items()) builder.add_item(item.id, item.title);
  std::vector<std::optional<UserIndex>> remap(n_users);
  for (UserIndex u = 0; u < n_users; ++u) {
    if (keep[u]) remap[u] = builder.add_user(dataset.user(u).id, std::move(attributes[u]));
  }
  if (builder.user_count() == 0) throw PreprocessError("preprocessing removed every user");
  for (const auto& x : dataset.interactions()) {
    if (remap[x.user]) builder.add_interaction(*remap[x.user], x.item, x.timestamp, x.weight);
  }
  return std::move(builder).build();
}

}  // namespace bxent
