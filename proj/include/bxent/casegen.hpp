#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bxent/cohort.hpp"
#include "bxent/dataset.hpp"
#include "bxent/entropy.hpp"

namespace bxent {

/// A: demography + history, B: history only, C: demography only.
enum class Setup { A, B, C };

std::string_view to_string(Setup setup);
Setup setup_from_string(std::string_view text);

/// One prompt's worth of state: who the proxy is, what they saw, what they
/// can be recommended, and how the group actually spread over it.
struct EvalCase {
  std::string case_id;
  Domain domain = Domain::synthetic;
  Setup setup = Setup::A;
  std::string setting;
  ProxyKey proxy_key;
  std::vector<std::string> history;
  std::vector<std::string> candidates;
  Distribution target;
  std::size_t group_size = 0;
  std::uint64_t seed = 0;

  std::size_t h() const noexcept { return history.size(); }
  friend bool operator==(const EvalCase&, const EvalCase&) = default;
};

enum class SkipKind { too_few_users, insufficient_c2_pool, empty_group };

std::string_view to_string(SkipKind kind);

struct SkipReason {
  SkipKind kind = SkipKind::empty_group;
  std::string detail;
};

struct CaseOptions {
  /// Candidate list size K (must be even).
  std::size_t candidates = 50;
  /// Groups smaller than this are skipped.
  std::size_t min_group_users = 3;
};

/// Number of history items a user must have interacted with: ceil(0.6 * h).
std::size_t eligibility_threshold(std::size_t h);

/// Users matching the key who interacted with at least ceil(0.6 h) of the
/// history items; for an empty history, exactly group_users(key).
std::vector<UserIndex> eligible_users(const Dataset& dataset, const ProxyKey& key,
                                      std::span<const ItemIndex> history);

using CaseOutcome = std::variant<EvalCase, SkipReason>;

/// One attempt of candidate selection, fully determined by `seed`.
///
/// History is h items drawn uniformly from the inventory; the never-interacted
/// half (C1, zero target) comes from items no eligible user touched, the
/// other half (C2) from items they did touch outside the history. C1 shrinks
/// and C2 grows when fewer than K/2 untouched items exist.
///
/// Throws ConfigError for odd K, setup B with a non-empty key, or setup C
/// with h > 0.
CaseOutcome select_case(const Dataset& dataset, const ProxyKey& key, Setup setup, std::size_t h,
                        std::uint64_t seed, const CaseOptions& options = {}, std::string_view setting = "");

struct MatrixRow {
  std::string setting;
  Setup setup = Setup::A;
  std::size_t history = 0;
  /// Requested cases; ignored when per_key is set.
  std::size_t count = 0;
  /// Request one case per proxy key of the setting (the "(Def)" rows).
  bool per_key = false;

  friend bool operator==(const MatrixRow&, const MatrixRow&) = default;
};

struct RowReport {
  MatrixRow row;
  std::size_t requested = 0;
  std::size_t produced = 0;
  std::size_t attempts = 0;
  std::map<SkipKind, std::size_t> skips;

  bool short_of_request() const noexcept { return produced < requested; }
};

struct GenerationResult {
  std::vector<EvalCase> cases;
  std::vector<RowReport> rows;
};

/// The experiment matrix: per setting a "(Def)" row (setup C, h = 0, one per
/// key), then h in {1,3,5,10,20} under setup B for the key-less setting and
/// setup A otherwise, each requesting `count` cases.
std::vector<MatrixRow> standard_case_matrix(const ProxySchema& schema, std::size_t count);

/// Throws ConfigError on unknown settings, zero counts, or setup/h/setting
/// combinations that setups B and C forbid.
void validate_matrix(std::span<const MatrixRow> matrix, const ProxySchema& schema, const CaseOptions& options);

/// Runs select_case repeatedly per row, cycling round-robin over the setting's
/// keys with fresh sub-seeds, until the row's request is met or 20x the
/// request in attempts is spent. Rows are independent, so the output does
/// not depend on evaluation order.
GenerationResult generate_cases(const Dataset& dataset, const ProxySchema& schema,
                                std::span<const MatrixRow> matrix, std::uint64_t seed,
                                const CaseOptions& options = {});

void write_cases_jsonl(std::ostream& out, std::span<const EvalCase> cases);
std::vector<EvalCase> read_cases_jsonl(const std::filesystem::path& path);

/// TSV: setting, setup, h, kind, count.
void write_skip_report(std::ostream& out, std::span<const RowReport> rows);
/// TSV: setting, setup, h, requested, produced, attempts.
void write_row_summary(std::ostream& out, std::span<const RowReport> rows);

}  // namespace bxent
