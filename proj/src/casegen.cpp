#include "bxent/casegen.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bxent/error.hpp"
#include "bxent/hash.hpp"
#include "bxent/rng.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace {

constexpr std::size_t kAttemptBudgetFactor = 20;

// Uniform sample of `n` distinct entries of `pool` (partial Fisher-Yates on a copy).
std::vector<ItemIndex> sample_without_replacement(std::vector<ItemIndex> pool, std::size_t n, Rng& rng) {
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
  }
  pool.resize(n);
  return pool;
}

std::vector<ItemIndex> sample_history(std::size_t n_items, std::size_t h, Rng& rng) {
  std::vector<ItemIndex> history;
  history.reserve(h);
  while (history.size() < h) {
    const auto candidate = static_cast<ItemIndex>(rng.index(n_items));
    if (std::find(history.begin(), history.end(), candidate) == history.end()) history.push_back(candidate);
  }
  return history;
}

std::string make_case_id(const Dataset& dataset, Setup setup, const ProxyKey& key,
                         std::span<const ItemIndex> history, std::uint64_t seed) {
  StableHasher hasher;
  hasher.add(dataset.fingerprint()).add(to_string(setup)).add(key.to_string());
  for (ItemIndex i : history) hasher.add(dataset.item(i).id);
  hasher.add(seed);
  return hasher.hex();
}

void check_preconditions(const Dataset& dataset, const ProxyKey& key, Setup setup, std::size_t h,
                         const CaseOptions& options) {
  if (options.candidates == 0 || options.candidates % 2 != 0) {
    throw ConfigError(fmt::format("candidate count K must be a positive even number, got {}", options.candidates));
  }
  if (setup == Setup::B && !key.empty()) throw ConfigError("setup B takes no demographic proxy");
  if (setup == Setup::C && h != 0) throw ConfigError("setup C takes no history");
  if (h > dataset.item_count()) throw ConfigError("history longer than the inventory");
}

}  // namespace

std::string_view to_string(Setup setup) {
  switch (setup) {
    case Setup::A: return "A";
    case Setup::B: return "B";
    case Setup::C: return "C";
  }
  return "A";
}

Setup setup_from_string(std::string_view text) {
  if (text == "A") return Setup::A;
  if (text == "B") return Setup::B;
  if (text == "C") return Setup::C;
  throw ConfigError("unknown setup '" + std::string(text) + "' (expected A, B or C)");
}

std::string_view to_string(SkipKind kind) {
  switch (kind) {
    case SkipKind::too_few_users: return "too_few_users";
    case SkipKind::insufficient_c2_pool: return "insufficient_c2_pool";
    case SkipKind::empty_group: return "empty_group";
  }
  return "empty_group";
}

std::size_t eligibility_threshold(std::size_t h) { return (3 * h + 4) / 5; }

std::vector<UserIndex> eligible_users(const Dataset& dataset, const ProxyKey& key,
                                      std::span<const ItemIndex> history) {
  auto group = group_users(dataset, key);
  if (history.empty()) return group;
  const std::size_t threshold = eligibility_threshold(history.size());
  std::vector<UserIndex> eligible;
  for (UserIndex u : group) {
    std::size_t hits = 0;
    for (ItemIndex item : history) hits += dataset.user_has_item(u, item) ? 1 : 0;
    if (hits >= threshold) eligible.push_back(u);
  }
  return eligible;
}

CaseOutcome select_case(const Dataset& dataset, const ProxyKey& key, Setup setup, std::size_t h,
                        std::uint64_t seed, const CaseOptions& options, std::string_view setting) {
  check_preconditions(dataset, key, setup, h, options);
  Rng rng(seed);
  const std::size_t n_items = dataset.item_count();

  const auto group = group_users(dataset, key);
  if (group.empty()) return SkipReason{SkipKind::empty_group, "no user matches " + key.to_string()};

  const auto history = sample_history(n_items, h, rng);
  std::vector<UserIndex> users;
  if (h == 0) {
    users = group;
  } else {
    const std::size_t threshold = eligibility_threshold(h);
    for (UserIndex u : group) {
      std::size_t hits = 0;
      for (ItemIndex item : history) hits += dataset.user_has_item(u, item) ? 1 : 0;
      if (hits >= threshold) users.push_back(u);
    }
  }
  if (users.size() < options.min_group_users) {
    return SkipReason{SkipKind::too_few_users,
                      fmt::format("{} eligible users (< {})", users.size(), options.min_group_users)};
  }

  std::vector<std::uint64_t> freq(n_items, 0);
  for (UserIndex u : users) {
    for (const auto& e : dataset.user_items(u)) freq[e.item] += e.events;
  }
  std::vector<bool> in_history(n_items, false);
  for (ItemIndex i : history) in_history[i] = true;

  std::vector<ItemIndex> never_pool;
  std::vector<ItemIndex> touched_pool;
  for (ItemIndex i = 0; i < n_items; ++i) {
    if (in_history[i]) continue;
    (freq[i] == 0 ? never_pool : touched_pool).push_back(i);
  }
  const std::size_t k = options.candidates;
  const std::size_t n_never = std::min(k / 2, never_pool.size());
  const std::size_t n_touched = k - n_never;
  if (touched_pool.size() < n_touched) {
    return SkipReason{SkipKind::insufficient_c2_pool,
                      fmt::format("{} interacted items available, {} needed", touched_pool.size(), n_touched)};
  }

  auto candidates = sample_without_replacement(std::move(never_pool), n_never, rng);
  auto touched = sample_without_replacement(std::move(touched_pool), n_touched, rng);
  candidates.insert(candidates.end(), touched.begin(), touched.end());
  rng.shuffle(candidates);

  EvalCase out;
  out.case_id = make_case_id(dataset, setup, key, history, seed);
  out.domain = dataset.domain();
  out.setup = setup;
  out.setting = std::string(setting);
  out.proxy_key = key;
  for (ItemIndex i : history) out.history.push_back(dataset.item(i).id);
  std::uint64_t total = 0;
  for (ItemIndex i : candidates) {
    out.candidates.push_back(dataset.item(i).id);
    total += freq[i];
  }
  out.target.reserve(candidates.size());
  for (ItemIndex i : candidates) {
    out.target.push_back(static_cast<double>(freq[i]) / static_cast<double>(total));
  }
  out.group_size = users.size();
  out.seed = seed;
  return out;
}

std::vector<MatrixRow> standard_case_matrix(const ProxySchema& schema, std::size_t count) {
  std::vector<MatrixRow> rows;
  for (const auto& setting : schema.settings) {
    rows.push_back(MatrixRow{setting.name, Setup::C, 0, 0, true});
    const Setup with_history = setting.attributes.empty() ? Setup::B : Setup::A;
    for (std::size_t h : {1, 3, 5, 10, 20}) rows.push_back(MatrixRow{setting.name, with_history, h, count, false});
  }
  return rows;
}

void validate_matrix(std::span<const MatrixRow> matrix, const ProxySchema& schema, const CaseOptions& options) {
  if (options.candidates == 0 || options.candidates % 2 != 0) {
    throw ConfigError(fmt::format("candidate count K must be a positive even number, got {}", options.candidates));
  }
  for (const auto& row : matrix) {
    const auto* setting = schema.find(row.setting);
    if (!setting) throw ConfigError("matrix row names unknown setting '" + row.setting + "'");
    if (!row.per_key && row.count == 0) {
      throw ConfigError(fmt::format("matrix row ({}, {}, h={}) requests 0 cases", row.setting,
                                    to_string(row.setup), row.history));
    }
    if (row.setup == Setup::B && !setting->attributes.empty()) {
      throw ConfigError("setup B requires a setting without proxy attributes, got '" + row.setting + "'");
    }
    if (row.setup == Setup::C && row.history != 0) throw ConfigError("setup C requires h = 0");
  }
}

GenerationResult generate_cases(const Dataset& dataset, const ProxySchema& schema,
                                std::span<const MatrixRow> matrix, std::uint64_t seed,
                                const CaseOptions& options) {
  validate_matrix(matrix, schema, options);
  const auto settings = enumerate_settings(schema, dataset);
  const auto keys_of = [&](const std::string& name) -> const std::vector<ProxyKey>& {
    for (const auto& s : settings) {
      if (s.name == name) return s.keys;
    }
    throw ConfigError("unknown setting '" + name + "'");
  };

  struct RowOutput {
    std::vector<EvalCase> cases;
    RowReport report;
  };
  const auto run_row = [&](const MatrixRow& row) {
    RowOutput out;
    out.report.row = row;
    const auto& keys = keys_of(row.setting);
    out.report.requested = row.per_key ? keys.size() : row.count;
    if (keys.empty() || out.report.requested == 0) return out;
    const std::uint64_t row_seed =
        Rng::derive(seed, StableHasher().add(row.setting).add(to_string(row.setup)).add(row.history).digest());
    const std::size_t budget = kAttemptBudgetFactor * out.report.requested;
    for (std::size_t attempt = 0; attempt < budget && out.cases.size() < out.report.requested; ++attempt) {
      const auto& key = keys[attempt % keys.size()];
      auto outcome = select_case(dataset, key, row.setup, row.history, Rng::derive(row_seed, attempt), options,
                                 row.setting);
      ++out.report.attempts;
      if (auto* c = std::get_if<EvalCase>(&outcome)) {
        out.cases.push_back(std::move(*c));
      } else {
        ++out.report.skips[std::get<SkipReason>(outcome).kind];
      }
    }
    out.report.produced = out.cases.size();
    return out;
  };

  std::vector<std::future<RowOutput>> pending;
  pending.reserve(matrix.size());
  for (const auto& row : matrix) pending.push_back(std::async(std::launch::async, run_row, std::cref(row)));

  GenerationResult result;
  for (auto& f : pending) {
    auto out = f.get();
    for (auto& c : out.cases) result.cases.push_back(std::move(c));
    result.rows.push_back(std::move(out.report));
  }
  return result;
}

void write_cases_jsonl(std::ostream& out, std::span<const EvalCase> cases) {
  for (const auto& c : cases) {
    nlohmann::ordered_json j;
    j["case_id"] = c.case_id;
    j["domain"] = to_string(c.domain);
    j["setup"] = to_string(c.setup);
    j["setting"] = c.setting;
    j["proxy_key"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : c.proxy_key.bindings()) j["proxy_key"][k] = v;
    j["h"] = c.h();
    j["history"] = c.history;
    j["candidates"] = c.candidates;
    j["target"] = c.target;
    j["group_size"] = c.group_size;
    j["seed"] = c.seed;
    out << j.dump() << '\n';
  }
}

std::vector<EvalCase> read_cases_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing or unreadable file", path.string());
  std::vector<EvalCase> cases;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EvalCase c;
      c.case_id = j.at("case_id").get<std::string>();
      c.domain = domain_from_string(j.at("domain").get<std::string>());
      c.setup = setup_from_string(j.at("setup").get<std::string>());
      c.setting = j.value("setting", "");
      AttributeMap bindings;
      for (const auto& [k, v] : j.at("proxy_key").items()) bindings.emplace(k, v.get<std::string>());
      c.proxy_key = ProxyKey(std::move(bindings));
      c.history = j.at("history").get<std::vector<std::string>>();
      c.candidates = j.at("candidates").get<std::vector<std::string>>();
      c.target = j.at("target").get<std::vector<double>>();
      c.group_size = j.at("group_size").get<std::size_t>();
      c.seed = j.at("seed").get<std::uint64_t>();
      if (c.target.size() != c.candidates.size()) throw InputError("target and candidates differ in length");
      cases.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed case: ") + e.what(), path.string(), line_no);
    } catch (const Error& e) {
      throw InputError(e.what(), path.string(), line_no);
    }
  }
  return cases;
}

void write_skip_report(std::ostream& out, std::span<const RowReport> rows) {
  out << "setting\tsetup\th\tkind\tcount\n";
  for (const auto& r : rows) {
    for (const auto& [kind, count] : r.skips) {
      out << r.row.setting << '\t' << to_string(r.row.setup) << '\t' << r.row.history << '\t' << to_string(kind)
          << '\t' << count << '\n';
    }
  }
}

void write_row_summary(std::ostream& out, std::span<const RowReport> rows) {
  out << "setting\tsetup\th\trequested\tproduced\tattempts\n";
  for (const auto& r : rows) {
    out << r.row.setting << '\t' << to_string(r.row.setup) << '\t' << r.row.history << '\t' << r.requested << '\t'
        << r.produced << '\t' << r.attempts << '\n';
  }
}

}  // namespace bxent
