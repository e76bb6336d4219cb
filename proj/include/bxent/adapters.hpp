#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "bxent/casegen.hpp"
#include "bxent/promptio.hpp"
#include "bxent/synth.hpp"

namespace bxent {

enum class ModelKind { http_chat, random, oracle, group_oracle, popularity, replay };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view text);

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::random;
  /// Chat-completions URL (http_chat).
  std::string endpoint;
  /// Model identifier sent to the endpoint; for replay, the cached model name
  /// to read (defaults to `name`).
  std::string model_id;
  /// Environment variable holding the bearer token; empty sends none.
  std::string api_key_env;
  double temperature = 0.0;
  int max_retries = 5;
  double timeout_seconds = 60.0;
  double backoff_seconds = 1.0;
  /// Requests per second; 0 disables the limiter.
  double rate_limit = 0.0;
  std::size_t max_in_flight = 8;

  bool remote() const noexcept { return kind == ModelKind::http_chat; }
};

struct CacheRecord {
  std::string case_id;
  std::string model;
  std::uint64_t prompt_hash = 0;
  std::string response;
  std::string created_at;
};

/// Append-only JSONL store of raw model responses keyed by
/// (case_id, model, prompt hash). The most recent line for a key wins;
/// corrupt lines are skipped and counted.
class ResponseCache {
 public:
  ResponseCache() = default;
  /// Loads existing records; a missing file is an empty cache.
  explicit ResponseCache(std::filesystem::path path);

  std::optional<CacheRecord> get(const std::string& case_id, const std::string& model,
                                 std::uint64_t prompt_hash) const;
  /// Appends (if backed by a file) and indexes one record. Thread-safe.
  void put(const std::string& case_id, const std::string& model, std::uint64_t prompt_hash,
           const std::string& response);

  std::size_t size() const;
  std::size_t corrupt_lines() const noexcept { return corrupt_lines_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  using Key = std::tuple<std::string, std::string, std::uint64_t>;
  std::filesystem::path path_;
  std::map<Key, CacheRecord> entries_;
  std::ofstream out_;
  std::size_t corrupt_lines_ = 0;
  std::vector<std::string> warnings_;
  mutable std::mutex mutex_;
};

std::uint64_t prompt_hash(const std::string& prompt_text);

/// What a ranker may look at besides the prompt.
struct AdapterContext {
  const Dataset* dataset = nullptr;
  const GroundTruth* truth = nullptr;
  const TitleMap* titles = nullptr;
  const ResponseCache* cache = nullptr;
  std::uint64_t seed = 0;
  std::size_t n_items = 10;
};

/// Produces the raw response text for one case. Baselines answer in the same
/// list format a chat model is asked for, so every response goes through
/// parse_response.
class Adapter {
 public:
  virtual ~Adapter() = default;
  virtual std::string respond(const EvalCase& c, const PromptText& prompt) = 0;
};

std::unique_ptr<Adapter> make_adapter(const ModelSpec& spec, const AdapterContext& context);

/// respond + parse_response.
RankedResponse rank(Adapter& adapter, const EvalCase& c, const PromptText& prompt, const TitleMap& titles,
                    std::size_t n_items = 10);

/// Candidate ids ordered by a score, descending, ties by candidate position.
std::vector<std::string> order_candidates(const EvalCase& c, const std::vector<double>& score);

/// Token bucket with a burst of one request.
class RateLimiter {
 public:
  explicit RateLimiter(double per_second);
  void acquire();

 private:
  double per_second_;
  std::chrono::steady_clock::time_point next_;
  std::mutex mutex_;
};

}  // namespace bxent
