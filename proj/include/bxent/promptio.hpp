#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bxent/casegen.hpp"

namespace bxent {

using TitleMap = std::unordered_map<std::string, std::string>;

struct PromptText {
  std::string case_id;
  std::string text;
};

enum class ParseStatus { ok, partial, unparseable };

std::string_view to_string(ParseStatus status);
ParseStatus parse_status_from_string(std::string_view text);

struct RankedResponse {
  std::string case_id;
  /// Distinct candidate item ids, best first.
  std::vector<std::string> ranked;
  ParseStatus status = ParseStatus::unparseable;
  std::string raw;
};

/// Prompt template with placeholders {persona}, {history}, {candidates},
/// {n_items} and {domain_noun}. {persona} and {history} expand to a full
/// line (with trailing newline) or to nothing.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

  static PromptTemplate for_domain(Domain domain);
  static PromptTemplate from_file(const std::filesystem::path& path);

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

/// Python repr of a list of strings: ['a', "b's"].
std::string python_list_literal(const std::vector<std::string>& values);

/// "The user is a 25-34 years old Male clerical/admin." or "" for an empty key.
std::string persona_sentence(Domain domain, const ProxyKey& key);

/// Throws InputError when an item id has no title.
PromptText render_prompt(const EvalCase& c, const TitleMap& titles, const PromptTemplate& tmpl,
                         std::size_t n_items = 10);
PromptText render_prompt(const EvalCase& c, const TitleMap& titles);

/// Finds the first bracketed list of quoted strings in `text` (code fences
/// and prose around it are ignored) and maps each entry onto a candidate:
/// exact title first, then case-folded/whitespace-collapsed match. Unknown
/// names are dropped, repeats keep their first position, and at most
/// `n_items` ids are kept. ok means exactly n_items matched.
RankedResponse parse_response(std::string_view text, const EvalCase& c, const TitleMap& titles,
                              std::size_t n_items = 10);

/// The list elements of the first bracketed string list, or nothing.
std::optional<std::vector<std::string>> extract_string_list(std::string_view text);

}  // namespace bxent
