#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bxent/adapters.hpp"
#include "bxent/casegen.hpp"
#include "bxent/cohort.hpp"
#include "bxent/curves.hpp"
#include "bxent/scoring.hpp"
#include "bxent/synth.hpp"

namespace bxent {

enum class SourceKind { movielens, lastfm, store, synth };

std::string_view to_string(SourceKind kind);

struct DatasetSource {
  SourceKind kind = SourceKind::synth;
  std::filesystem::path path;
  /// "default" applies the domain's standard filtering, "none" skips it.
  std::string preprocess = "default";
};

/// Everything one run needs. Relative paths in a config file resolve against
/// the file's directory; the parsed RunConfig only holds absolute paths.
struct RunConfig {
  DatasetSource dataset;
  SynthSpec synth;
  /// Overrides the domain's default proxy settings when present.
  std::optional<std::vector<ProxySetting>> settings;

  CaseOptions cases;
  std::size_t top_n = 10;
  /// true: the standard matrix with `matrix_count` per row; false: `rows`.
  bool standard_matrix = true;
  std::size_t matrix_count = 300;
  std::vector<MatrixRow> rows;

  std::uint64_t seed = 0;
  ScoringPolicy policy = ScoringPolicy::strict;
  double eps = kDefaultLogClamp;
  CurveOptions curves;
  std::vector<ModelSpec> models;

  std::filesystem::path output_dir;
  /// Defaults to <output_dir>/cache.jsonl.
  std::filesystem::path cache_path;
  std::optional<std::filesystem::path> prompt_template;

  /// Throws ConfigError.
  void validate() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig parse_config(const nlohmann::ordered_json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& file);

/// The config with every default spelled out; paths are written relative to
/// `relative_to` so the document can live next to the artifacts.
nlohmann::ordered_json effective_document(const RunConfig& config, const std::filesystem::path& relative_to);
void write_effective_config(const RunConfig& config, const std::filesystem::path& file);

}  // namespace bxent
