#include "bxent/scoring.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace {

constexpr std::string_view kScoresHeader =
    "case_id,model,domain,setup,setting,proxy,h,group_size,H,CE,parse_status";

}  // namespace

std::string_view to_string(ScoringPolicy policy) {
  return policy == ScoringPolicy::strict ? "strict" : "pad";
}

ScoringPolicy scoring_policy_from_string(std::string_view text) {
  if (text == "strict") return ScoringPolicy::strict;
  if (text == "pad") return ScoringPolicy::pad;
  throw ConfigError("unknown scoring policy '" + std::string(text) + "'");
}

ScoreOutcome score_case(const EvalCase& c, const RankedResponse& response, std::string_view model,
                        ScoringPolicy policy, std::size_t n_items, double eps) {
  auto unscored = [&](std::string reason) {
    return UnscoredCase{c.case_id, std::string(model), std::move(reason)};
  };
  if (response.status == ParseStatus::unparseable) return unscored("unparseable");
  if (response.status == ParseStatus::partial && policy == ScoringPolicy::strict) {
    return unscored(fmt::format("partial ({} of {})", response.ranked.size(), n_items));
  }

  std::unordered_map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < c.candidates.size(); ++i) position.emplace(c.candidates[i], i);
  std::vector<std::size_t> picks;
  std::vector<bool> used(c.candidates.size(), false);
  for (const auto& id : response.ranked) {
    auto it = position.find(id);
    if (it == position.end()) throw InvariantError("ranked item " + id + " is not a candidate of " + c.case_id);
    if (used[it->second]) continue;
    used[it->second] = true;
    picks.push_back(it->second);
  }
  for (std::size_t i = 0; picks.size() < n_items && i < c.candidates.size(); ++i) {
    if (!used[i]) {
      used[i] = true;
      picks.push_back(i);
    }
  }

  const Distribution q = impose_distribution(c.target, picks);
  ScoredCase s;
  s.case_id = c.case_id;
  s.model = std::string(model);
  s.domain = c.domain;
  s.setup = c.setup;
  s.setting = c.setting;
  s.proxy = c.proxy_key.to_string();
  s.h = c.h();
  s.group_size = c.group_size;
  s.H = entropy(c.target);
  s.CE = cross_entropy(c.target, q, eps);
  s.parse_status = response.status;
  return s;
}

void write_scores_csv(std::ostream& out, std::span<const ScoredCase> rows) {
  out << kScoresHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.case_id) << ',' << csv_field(r.model) << ',' << to_string(r.domain) << ','
        << to_string(r.setup) << ',' << csv_field(r.setting) << ',' << csv_field(r.proxy) << ',' << r.h
        << ',' << r.group_size << ',' << format_double(r.H) << ',' << format_double(r.CE) << ','
        << to_string(r.parse_status) << '\n';
  }
}

std::vector<ScoredCase> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing or unreadable scores file", path.string());
  std::string line;
  if (!read_line(in, line) || line != kScoresHeader) {
    throw InputError("unexpected scores header", path.string(), 1);
  }
  std::vector<ScoredCase> rows;
  std::size_t line_no = 1;
  while (read_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto f = parse_csv_record(line);
      if (f.size() != 11) throw std::invalid_argument(fmt::format("expected 11 fields, got {}", f.size()));
      ScoredCase r;
      r.case_id = f[0];
      r.model = f[1];
      r.domain = domain_from_string(f[2]);
      r.setup = setup_from_string(f[3]);
      r.setting = f[4];
      r.proxy = f[5];
      r.h = static_cast<std::size_t>(parse_int(f[6]));
      r.group_size = static_cast<std::size_t>(parse_int(f[7]));
      r.H = parse_double(f[8]);
      r.CE = parse_double(f[9]);
      r.parse_status = parse_status_from_string(f[10]);
      rows.push_back(std::move(r));
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError(e.what(), path.string(), line_no);
    }
  }
  return rows;
}

void write_unscored_csv(std::ostream& out, std::span<const UnscoredCase> rows) {
  out << "case_id,model,reason\n";
  for (const auto& r : rows) {
    out << csv_field(r.case_id) << ',' << csv_field(r.model) << ',' << csv_field(r.reason) << '\n';
  }
}

}  // namespace bxent
