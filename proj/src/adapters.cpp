#include "bxent/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bxent/cohort.hpp"
#include "bxent/error.hpp"
#include "bxent/hash.hpp"
#include "bxent/rng.hpp"
#include "bxent/text.hpp"

namespace bxent {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::http_chat: return "http_chat";
    case ModelKind::random: return "random";
    case ModelKind::oracle: return "oracle";
    case ModelKind::group_oracle: return "group_oracle";
    case ModelKind::popularity: return "popularity";
    case ModelKind::replay: return "replay";
  }
  return "random";
}

ModelKind model_kind_from_string(std::string_view text) {
  for (auto k : {ModelKind::http_chat, ModelKind::random, ModelKind::oracle, ModelKind::group_oracle,
                 ModelKind::popularity, ModelKind::replay}) {
    if (to_string(k) == text) return k;
  }
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

std::uint64_t prompt_hash(const std::string& prompt_text) { return fnv1a64(prompt_text); }

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string line;
  std::size_t line_no = 0;
  while (read_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CacheRecord r;
      r.case_id = j.at("case_id").get<std::string>();
      r.model = j.at("model").get<std::string>();
      r.prompt_hash = from_hex64(j.at("prompt_hash").get<std::string>());
      r.response = j.at("response").get<std::string>();
      r.created_at = j.value("created_at", "");
      Key key{r.case_id, r.model, r.prompt_hash};
      entries_[std::move(key)] = std::move(r);
    } catch (const std::exception& e) {
      ++corrupt_lines_;
      warnings_.push_back(fmt::format("{}:{}: skipped corrupt cache line ({})", path_.string(), line_no, e.what()));
    }
  }
}

std::optional<CacheRecord> ResponseCache::get(const std::string& case_id, const std::string& model,
                                              std::uint64_t hash) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(Key{case_id, model, hash});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const std::string& case_id, const std::string& model, std::uint64_t hash,
                        const std::string& response) {
  CacheRecord r{case_id, model, hash, response,
                fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)))};
  std::lock_guard lock(mutex_);
  if (!path_.empty()) {
    nlohmann::ordered_json j;
    j["case_id"] = r.case_id;
    j["model"] = r.model;
    j["prompt_hash"] = to_hex64(hash);
    j["response"] = r.response;
    j["created_at"] = r.created_at;
    if (!out_.is_open()) {
      out_.open(path_, std::ios::binary | std::ios::app);
      if (!out_) throw InputError("cannot append to response cache", path_.string());
    }
    out_ << j.dump() << '\n';
    out_.flush();
  }
  entries_[Key{case_id, model, hash}] = std::move(r);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

RateLimiter::RateLimiter(double per_second) : per_second_(per_second), next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (!(per_second_ > 0.0)) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(1.0 / per_second_));
  }
  std::this_thread::sleep_until(slot);
}

std::vector<std::string> order_candidates(const EvalCase& c, const std::vector<double>& score) {
  std::vector<std::size_t> order(c.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::vector<std::string> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(c.candidates[i]);
  return out;
}

namespace {

class ListAdapter : public Adapter {
 public:
  explicit ListAdapter(const AdapterContext& context) : context_(context) {
    if (!context_.titles) throw ConfigError("baseline rankers need the item titles");
  }

  std::string respond(const EvalCase& c, const PromptText&) override {
    auto ids = choose(c);
    if (ids.size() > context_.n_items) ids.resize(context_.n_items);
    std::vector<std::string> names;
    names.reserve(ids.size());
    for (const auto& id : ids) names.push_back(context_.titles->at(id));
    return python_list_literal(names);
  }

 protected:
  virtual std::vector<std::string> choose(const EvalCase& c) = 0;
  const AdapterContext& context() const { return context_; }

  std::vector<ItemIndex> candidate_indices(const EvalCase& c) const {
    std::vector<ItemIndex> out;
    out.reserve(c.candidates.size());
    for (const auto& id : c.candidates) {
      auto idx = context_.dataset->find_item(id);
      if (!idx) throw InvariantError("candidate " + id + " is not in the dataset");
      out.push_back(*idx);
    }
    return out;
  }

 private:
  AdapterContext context_;
};

class RandomAdapter final : public ListAdapter {
 public:
  RandomAdapter(std::string name, const AdapterContext& context) : ListAdapter(context), name_(std::move(name)) {}

 protected:
  std::vector<std::string> choose(const EvalCase& c) override {
    StableHasher h;
    h.add(name_);
    h.add(c.case_id);
    Rng rng(Rng::derive(context().seed, h.digest()));
    auto ids = c.candidates;
    rng.shuffle(ids);
    return ids;
  }

 private:
  std::string name_;
};

class OracleAdapter final : public ListAdapter {
 public:
  using ListAdapter::ListAdapter;

 protected:
  std::vector<std::string> choose(const EvalCase& c) override { return order_candidates(c, c.target); }
};

class GroupOracleAdapter final : public ListAdapter {
 public:
  explicit GroupOracleAdapter(const AdapterContext& context) : ListAdapter(context) {
    if (!context.truth) throw ConfigError("group_oracle needs synthetic ground truth");
    if (!context.dataset) throw ConfigError("group_oracle needs the dataset");
  }

 protected:
  std::vector<std::string> choose(const EvalCase& c) override {
    Distribution group;
    {
      std::lock_guard lock(mutex_);
      auto it = memo_.find(c.proxy_key);
      if (it == memo_.end()) {
        it = memo_.emplace(c.proxy_key, context().truth->group_distribution(*context().dataset, c.proxy_key)).first;
      }
      group = it->second;
    }
    const auto indices = candidate_indices(c);
    std::vector<double> score(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) score[i] = group[indices[i]];
    return order_candidates(c, score);
  }

 private:
  std::map<ProxyKey, Distribution> memo_;
  std::mutex mutex_;
};

class PopularityAdapter final : public ListAdapter {
 public:
  explicit PopularityAdapter(const AdapterContext& context) : ListAdapter(context) {
    if (!context.dataset) throw ConfigError("popularity needs the dataset");
  }

 protected:
  std::vector<std::string> choose(const EvalCase& c) override {
    const auto indices = candidate_indices(c);
    std::vector<double> score(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      score[i] = static_cast<double>(context().dataset->item_events(indices[i]));
    }
    return order_candidates(c, score);
  }
};

class ReplayAdapter final : public Adapter {
 public:
  ReplayAdapter(std::string source, const AdapterContext& context) : source_(std::move(source)), cache_(context.cache) {
    if (!cache_) throw ConfigError("replay needs a response cache");
  }

  std::string respond(const EvalCase& c, const PromptText& prompt) override {
    auto hit = cache_->get(c.case_id, source_, prompt_hash(prompt.text));
    if (!hit) throw CacheMissError("no cached response of " + source_ + " for case " + c.case_id);
    return hit->response;
  }

 private:
  std::string source_;
  const ResponseCache* cache_;
};

struct Endpoint {
  std::string origin;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an http(s) URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpChatAdapter final : public Adapter {
 public:
  explicit HttpChatAdapter(const ModelSpec& spec) : spec_(spec), endpoint_(split_endpoint(spec.endpoint)),
                                                    limiter_(spec.rate_limit) {
    if (!spec_.api_key_env.empty()) {
      const char* key = std::getenv(spec_.api_key_env.c_str());
      if (!key || !*key) throw ConfigError("environment variable " + spec_.api_key_env + " is not set");
      api_key_ = key;
    }
    if (spec_.max_retries < 1) throw ConfigError("max_retries must be at least 1");
  }

  std::string respond(const EvalCase&, const PromptText& prompt) override {
    nlohmann::json body;
    body["model"] = spec_.model_id.empty() ? spec_.name : spec_.model_id;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt.text}}});
    body["temperature"] = spec_.temperature;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt < spec_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(spec_.backoff_seconds * std::ldexp(1.0, attempt - 1)));
      }
      limiter_.acquire();
      httplib::Client client(endpoint_.origin);
      const auto timeout = std::chrono::duration<double>(spec_.timeout_seconds);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      auto res = client.Post(endpoint_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = fmt::format("HTTP {}", res->status);
        continue;
      }
      if (res->status != 200) throw AdapterError(fmt::format("{}: HTTP {}: {}", spec_.name, res->status, res->body));
      try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw AdapterError(spec_.name + ": malformed completion body: " + e.what());
      }
    }
    throw AdapterError(fmt::format("{}: giving up after {} attempts ({})", spec_.name, spec_.max_retries, last_error));
  }

 private:
  ModelSpec spec_;
  Endpoint endpoint_;
  std::string api_key_;
  RateLimiter limiter_;
};

}  // namespace

std::unique_ptr<Adapter> make_adapter(const ModelSpec& spec, const AdapterContext& context) {
  switch (spec.kind) {
    case ModelKind::http_chat: return std::make_unique<HttpChatAdapter>(spec);
    case ModelKind::random: return std::make_unique<RandomAdapter>(spec.name, context);
    case ModelKind::oracle: return std::make_unique<OracleAdapter>(context);
    case ModelKind::group_oracle: return std::make_unique<GroupOracleAdapter>(context);
    case ModelKind::popularity: return std::make_unique<PopularityAdapter>(context);
    case ModelKind::replay:
      return std::make_unique<ReplayAdapter>(spec.model_id.empty() ? spec.name : spec.model_id, context);
  }
  throw ConfigError("unknown model kind");
}

RankedResponse rank(Adapter& adapter, const EvalCase& c, const PromptText& prompt, const TitleMap& titles,
                    std::size_t n_items) {
  return parse_response(adapter.respond(c, prompt), c, titles, n_items);
}

}  // namespace bxent
