#include "bxent/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "bxent/error.hpp"
#include "bxent/toml.hpp"

namespace bxent {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Typed access to one TOML table that rejects keys nobody asked about.
class Table {
 public:
  Table(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(fmt::format("[{}] must be a table", path_));
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  std::string str(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_string()) fail(key, "a string");
    return v.get<std::string>();
  }

  std::uint64_t uint(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(key, "a non-negative integer");
    return v.get<std::uint64_t>();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number()) fail(key, "a number");
    return v.get<double>();
  }

  std::vector<std::string> strings(const std::string& key) {
    if (!has(key)) return {};
    const auto& v = node_.at(key);
    if (!v.is_array()) fail(key, "an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) fail(key, "an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Table sub(const std::string& key) {
    seen_.insert(key);
    return Table(node_.at(key), path_.empty() ? key : path_ + "." + key);
  }

  std::vector<Table> subs(const std::string& key) {
    std::vector<Table> out;
    if (!has(key)) return out;
    const auto& v = node_.at(key);
    if (!v.is_array()) fail(key, "an array of tables");
    for (const auto& e : v) out.emplace_back(e, (path_.empty() ? key : path_ + "." + key) + "[]");
    return out;
  }

  const json& node() const { return node_; }

  void finish() const {
    for (const auto& [k, v] : node_.items()) {
      if (!seen_.count(k)) {
        throw ConfigError(path_.empty() ? fmt::format("unknown key '{}'", k)
                                        : fmt::format("unknown key '{}' in [{}]", k, path_));
      }
    }
  }

 private:
  [[noreturn]] void fail(const std::string& key, std::string_view expected) const {
    throw ConfigError(fmt::format("{}{} must be {}", path_.empty() ? "" : path_ + ".", key, expected));
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

SourceKind source_from_string(std::string_view text) {
  for (auto k : {SourceKind::movielens, SourceKind::lastfm, SourceKind::store, SourceKind::synth}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown dataset source '" + std::string(text) + "'");
}

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

std::string relative_text(const fs::path& p, const fs::path& base) {
  if (p.empty()) return "";
  auto rel = p.lexically_relative(base);
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::movielens: return "movielens";
    case SourceKind::lastfm: return "lastfm";
    case SourceKind::store: return "store";
    case SourceKind::synth: return "synth";
  }
  return "synth";
}

void RunConfig::validate() const {
  if (cases.candidates == 0 || cases.candidates % 2 != 0) {
    throw ConfigError(fmt::format("cases.candidates must be a positive even number, got {}", cases.candidates));
  }
  if (top_n == 0 || top_n > cases.candidates) {
    throw ConfigError(fmt::format("cases.top_n must lie in [1, {}]", cases.candidates));
  }
  if (cases.min_group_users == 0) throw ConfigError("cases.min_group_users must be positive");
  if (standard_matrix && matrix_count == 0) throw ConfigError("cases.count must be at least 1");
  if (!standard_matrix) {
    if (rows.empty()) throw ConfigError("a custom case matrix needs at least one [[cases.rows]] entry");
    for (const auto& r : rows) {
      if (!r.per_key && r.count == 0) throw ConfigError("case matrix counts must be at least 1");
    }
  }
  if (dataset.kind == SourceKind::synth) {
    synth.validate();
  } else if (dataset.path.empty()) {
    throw ConfigError("dataset.path is required for source " + std::string(to_string(dataset.kind)));
  }
  if (dataset.preprocess != "default" && dataset.preprocess != "none") {
    throw ConfigError("dataset.preprocess must be \"default\" or \"none\"");
  }
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("scoring.eps must lie in (0, 1)");
  if (curves.bins == 0 || curves.window == 0) throw ConfigError("curves.bins and curves.window must be positive");
  if (output_dir.empty()) throw ConfigError("output.dir is required");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (m.name.empty()) throw ConfigError("every model needs a name");
    if (!names.insert(m.name).second) throw ConfigError("duplicate model name '" + m.name + "'");
    if (m.temperature != 0.0) throw ConfigError("model " + m.name + ": temperature is fixed at 0");
    if (m.kind == ModelKind::http_chat && m.endpoint.empty()) throw ConfigError("model " + m.name + " needs an endpoint");
    if (m.max_retries < 1) throw ConfigError("model " + m.name + ": max_retries must be at least 1");
    if (m.max_in_flight == 0) throw ConfigError("model " + m.name + ": max_in_flight must be at least 1");
    if (m.rate_limit < 0.0 || m.timeout_seconds <= 0.0 || m.backoff_seconds < 0.0) {
      throw ConfigError("model " + m.name + ": rate_limit, timeout and backoff must be non-negative");
    }
  }
  if (settings) {
    std::set<std::string> setting_names;
    for (const auto& s : *settings) {
      if (s.name.empty() || !setting_names.insert(s.name).second) {
        throw ConfigError("proxy setting names must be non-empty and unique");
      }
    }
  }
}

RunConfig parse_config(const nlohmann::ordered_json& doc, const fs::path& base_dir) {
  RunConfig c;
  Table root(doc, "");
  c.seed = root.uint("seed", 0);

  if (!root.has("dataset")) throw ConfigError("missing [dataset] table");
  {
    auto t = root.sub("dataset");
    c.dataset.kind = source_from_string(t.str("source", ""));
    const auto path = t.str("path", "");
    if (!path.empty()) c.dataset.path = resolve(base_dir, path);
    c.dataset.preprocess = t.str("preprocess", "default");
    t.finish();
  }

  if (root.has("synth")) {
    auto t = root.sub("synth");
    c.synth.kind = synth_case_from_string(t.str("case", "average"));
    c.synth.n_users = t.uint("users", c.synth.n_users);
    c.synth.n_items = t.uint("items", c.synth.n_items);
    c.synth.events_per_user = t.uint("events_per_user", c.synth.events_per_user);
    c.synth.alpha = t.number("alpha", c.synth.alpha);
    c.synth.lambda = t.number("lambda", c.synth.lambda);
    c.synth.seed = t.uint("seed", c.seed);
    if (t.has("attributes")) {
      auto a = t.sub("attributes");
      for (const auto& [name, v] : a.node().items()) c.synth.attributes[name] = a.uint(name, 0);
      a.finish();
    }
    t.finish();
  } else {
    c.synth.seed = c.seed;
  }

  if (root.has("schema")) {
    auto t = root.sub("schema");
    std::vector<ProxySetting> settings;
    for (auto& s : t.subs("settings")) {
      ProxySetting setting;
      setting.name = s.str("name", "");
      setting.attributes = s.strings("attributes");
      s.finish();
      settings.push_back(std::move(setting));
    }
    t.finish();
    c.settings = std::move(settings);
  }

  if (root.has("cases")) {
    auto t = root.sub("cases");
    c.cases.candidates = t.uint("candidates", c.cases.candidates);
    c.cases.min_group_users = t.uint("min_group_users", c.cases.min_group_users);
    c.top_n = t.uint("top_n", c.top_n);
    const auto matrix = t.str("matrix", "standard");
    if (matrix != "standard" && matrix != "custom") throw ConfigError("cases.matrix must be \"standard\" or \"custom\"");
    c.standard_matrix = matrix == "standard";
    c.matrix_count = t.uint("count", c.matrix_count);
    for (auto& r : t.subs("rows")) {
      MatrixRow row;
      row.setting = r.str("setting", "");
      row.setup = setup_from_string(r.str("setup", "A"));
      row.history = r.uint("h", 0);
      if (r.has("count") && r.raw("count").is_string()) {
        if (r.raw("count").get<std::string>() != "per_key") throw ConfigError("cases.rows.count must be a number or \"per_key\"");
        row.per_key = true;
      } else {
        row.count = r.uint("count", 0);
      }
      r.finish();
      c.rows.push_back(std::move(row));
    }
    t.finish();
  }

  if (root.has("scoring")) {
    auto t = root.sub("scoring");
    c.policy = scoring_policy_from_string(t.str("policy", "strict"));
    c.eps = t.number("eps", c.eps);
    t.finish();
  }

  if (root.has("curves")) {
    auto t = root.sub("curves");
    c.curves.bins = t.uint("bins", c.curves.bins);
    c.curves.window = t.uint("window", c.curves.window);
    c.curves.degree = t.uint("degree", c.curves.degree);
    c.curves.min_occupied_bins = t.uint("min_occupied_bins", c.curves.min_occupied_bins);
    t.finish();
  }

  for (auto& t : root.subs("models")) {
    ModelSpec m;
    m.name = t.str("name", "");
    m.kind = model_kind_from_string(t.str("kind", ""));
    m.endpoint = t.str("endpoint", "");
    m.model_id = t.str("model_id", "");
    m.api_key_env = t.str("api_key_env", "");
    m.temperature = t.number("temperature", 0.0);
    m.max_retries = static_cast<int>(t.uint("max_retries", 5));
    m.timeout_seconds = t.number("timeout", m.timeout_seconds);
    m.backoff_seconds = t.number("backoff", m.backoff_seconds);
    m.rate_limit = t.number("rate_limit", m.rate_limit);
    m.max_in_flight = t.uint("max_in_flight", m.max_in_flight);
    t.finish();
    c.models.push_back(std::move(m));
  }

  if (!root.has("output")) throw ConfigError("missing [output] table");
  {
    auto t = root.sub("output");
    const auto dir = t.str("dir", "");
    if (dir.empty()) throw ConfigError("output.dir is required");
    c.output_dir = resolve(base_dir, dir);
    const auto cache = t.str("cache", "");
    c.cache_path = cache.empty() ? c.output_dir / "cache.jsonl" : resolve(base_dir, cache);
    t.finish();
  }

  if (root.has("prompt")) {
    auto t = root.sub("prompt");
    const auto tmpl = t.str("template", "");
    if (!tmpl.empty()) c.prompt_template = resolve(base_dir, tmpl);
    t.finish();
  }

  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& file) {
  const auto doc = read_toml_file(file);
  auto base = fs::absolute(file).parent_path();
  return parse_config(doc, base);
}

nlohmann::ordered_json effective_document(const RunConfig& c, const fs::path& relative_to) {
  json j;
  j["seed"] = c.seed;
  j["dataset"] = {{"source", to_string(c.dataset.kind)}};
  if (!c.dataset.path.empty()) j["dataset"]["path"] = relative_text(c.dataset.path, relative_to);
  j["dataset"]["preprocess"] = c.dataset.preprocess;
  if (c.dataset.kind == SourceKind::synth) {
    json s;
    s["case"] = to_string(c.synth.kind);
    s["users"] = c.synth.n_users;
    s["items"] = c.synth.n_items;
    s["events_per_user"] = c.synth.events_per_user;
    s["alpha"] = c.synth.alpha;
    s["lambda"] = c.synth.lambda;
    s["seed"] = c.synth.seed;
    s["attributes"] = json::object();
    for (const auto& [name, n] : c.synth.attributes) s["attributes"][name] = n;
    j["synth"] = std::move(s);
  }
  if (c.settings) {
    json arr = json::array();
    for (const auto& s : *c.settings) arr.push_back({{"name", s.name}, {"attributes", s.attributes}});
    j["schema"] = {{"settings", std::move(arr)}};
  }
  json cases;
  cases["candidates"] = c.cases.candidates;
  cases["min_group_users"] = c.cases.min_group_users;
  cases["top_n"] = c.top_n;
  cases["matrix"] = c.standard_matrix ? "standard" : "custom";
  cases["count"] = c.matrix_count;
  if (!c.rows.empty()) {
    json rows = json::array();
    for (const auto& r : c.rows) {
      json row;
      row["setting"] = r.setting;
      row["setup"] = to_string(r.setup);
      row["h"] = r.history;
      if (r.per_key) {
        row["count"] = "per_key";
      } else {
        row["count"] = r.count;
      }
      rows.push_back(std::move(row));
    }
    cases["rows"] = std::move(rows);
  }
  j["cases"] = std::move(cases);
  j["scoring"] = {{"policy", to_string(c.policy)}, {"eps", c.eps}};
  j["curves"] = {{"bins", c.curves.bins},
                 {"window", c.curves.window},
                 {"degree", c.curves.degree},
                 {"min_occupied_bins", c.curves.min_occupied_bins}};
  json models = json::array();
  for (const auto& m : c.models) {
    json mj;
    mj["name"] = m.name;
    mj["kind"] = to_string(m.kind);
    if (!m.endpoint.empty()) mj["endpoint"] = m.endpoint;
    if (!m.model_id.empty()) mj["model_id"] = m.model_id;
    if (!m.api_key_env.empty()) mj["api_key_env"] = m.api_key_env;
    mj["temperature"] = m.temperature;
    mj["max_retries"] = m.max_retries;
    mj["timeout"] = m.timeout_seconds;
    mj["backoff"] = m.backoff_seconds;
    mj["rate_limit"] = m.rate_limit;
    mj["max_in_flight"] = m.max_in_flight;
    models.push_back(std::move(mj));
  }
  if (!models.empty()) j["models"] = std::move(models);
  j["output"] = {{"dir", relative_text(c.output_dir, relative_to)}, {"cache", relative_text(c.cache_path, relative_to)}};
  if (c.prompt_template) j["prompt"] = {{"template", relative_text(*c.prompt_template, relative_to)}};
  return j;
}

void write_effective_config(const RunConfig& config, const fs::path& file) {
  const auto base = fs::absolute(file).parent_path();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write effective config", file.string());
  out << write_toml(effective_document(config, base));
}

}  // namespace bxent
