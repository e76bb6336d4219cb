#pragma once

#include <filesystem>
#include <iosfwd>

#include "bxent/config.hpp"

namespace bxent {

/// File layout of one run's output directory.
struct Artifacts {
  explicit Artifacts(std::filesystem::path root) : dir(std::move(root)) {}

  std::filesystem::path dir;

  std::filesystem::path dataset() const { return dir / "dataset"; }
  std::filesystem::path ground_truth() const { return dir / "dataset" / "ground_truth.json"; }
  std::filesystem::path ingest_skips() const { return dir / "ingest_skips.tsv"; }
  std::filesystem::path cases() const { return dir / "cases.jsonl"; }
  std::filesystem::path case_skips() const { return dir / "skips.tsv"; }
  std::filesystem::path case_rows() const { return dir / "rows.tsv"; }
  std::filesystem::path responses() const { return dir / "responses.jsonl"; }
  std::filesystem::path scores() const { return dir / "scores.csv"; }
  std::filesystem::path unscored() const { return dir / "unscored.csv"; }
  std::filesystem::path fit() const { return dir / "fit.json"; }
  std::filesystem::path effective_config() const { return dir / "config.toml"; }
};

/// Reads (and optionally filters) a MovieLens, Last.fm or stored dataset into
/// the artifact store.
void stage_ingest(const RunConfig& config, std::ostream& log);
/// Generates the synthetic population plus its ground-truth sidecar.
void stage_synth(const RunConfig& config, std::ostream& log);
/// stage_ingest or stage_synth, by dataset source.
void stage_dataset(const RunConfig& config, std::ostream& log);
void stage_gen_cases(const RunConfig& config, std::ostream& log);
/// Queries every model for every case (remote answers go through the cache)
/// and records parsed rankings in responses.jsonl.
void stage_rank(const RunConfig& config, std::ostream& log);
void stage_score(const RunConfig& config, std::ostream& log);
void stage_fit(const RunConfig& config, std::ostream& log);
void stage_report(const RunConfig& config, std::ostream& log);

/// All stages in order. Each stage only reads the config's declared inputs
/// and earlier stages' files; failures surface as StageError naming the stage
/// while everything already written stays on disk.
void run_pipeline(const RunConfig& config, std::ostream& log);

/// Writes the effective config into the artifact directory.
void record_config(const RunConfig& config);

/// The proxy schema in force for a dataset under this config.
ProxySchema schema_for(const RunConfig& config, const Dataset& dataset);

}  // namespace bxent
