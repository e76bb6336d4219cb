#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bxent/casegen.hpp"
#include "bxent/promptio.hpp"

namespace bxent {

/// strict: only fully parsed rankings are scored.
/// pad: partial rankings are completed with the unpicked candidates in
/// candidate-list order.
enum class ScoringPolicy { strict, pad };

std::string_view to_string(ScoringPolicy policy);
ScoringPolicy scoring_policy_from_string(std::string_view text);

struct ScoredCase {
  std::string case_id;
  std::string model;
  Domain domain = Domain::synthetic;
  Setup setup = Setup::A;
  std::string setting;
  std::string proxy;
  std::size_t h = 0;
  std::size_t group_size = 0;
  double H = 0.0;
  double CE = 0.0;
  ParseStatus parse_status = ParseStatus::ok;

  friend bool operator==(const ScoredCase&, const ScoredCase&) = default;
};

struct UnscoredCase {
  std::string case_id;
  std::string model;
  std::string reason;
};

using ScoreOutcome = std::variant<ScoredCase, UnscoredCase>;

/// Entropy of the group target and cross-entropy of the target against the
/// model's ranking imposed onto the target's own values.
ScoreOutcome score_case(const EvalCase& c, const RankedResponse& response, std::string_view model,
                        ScoringPolicy policy = ScoringPolicy::strict, std::size_t n_items = 10,
                        double eps = kDefaultLogClamp);

/// Header: case_id,model,domain,setup,setting,proxy,h,group_size,H,CE,parse_status
void write_scores_csv(std::ostream& out, std::span<const ScoredCase> rows);
std::vector<ScoredCase> read_scores_csv(const std::filesystem::path& path);

/// Header: case_id,model,reason
void write_unscored_csv(std::ostream& out, std::span<const UnscoredCase> rows);

}  // namespace bxent
