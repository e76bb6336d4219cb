#include "bxent/promptio.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace {

constexpr std::string_view kRules =
    "# AI Rules\n"
    "- Output response as a Python list only.\n"
    "- Do not output any extra text.\n"
    "- Do not wrap the response in Python markers.\n"
    "- Do not assign the list to any variable.\n"
    "- List values in double-quotes.\n"
    "\n";

struct DomainWords {
  std::string_view noun;
  std::string_view plural;
  std::string_view verb;
  std::string_view past;
  std::string_view history;
};

DomainWords words_for(Domain domain) {
  switch (domain) {
    case Domain::movies: return {"movie", "movies", "watch", "watched", "previous view history"};
    case Domain::music: return {"music", "music", "listen to", "listened to", "previous listening history"};
    case Domain::synthetic: return {"item", "items", "choose", "chosen", "previous interaction history"};
  }
  return {"item", "items", "choose", "chosen", "previous interaction history"};
}

std::string gender_word(std::string_view value) {
  if (value == "M") return "Male";
  if (value == "F") return "Female";
  return std::string(value);
}

const std::string* lookup_title(const TitleMap& titles, const std::string& id) {
  auto it = titles.find(id);
  if (it == titles.end()) throw InputError("no title for item '" + id + "'");
  return &it->second;
}

std::string substitute(std::string_view tmpl, const std::unordered_map<std::string_view, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 1024);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(tmpl.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Parses one list starting at text[pos] == '['. Returns nullopt if the
// bracket does not open a list made only of quoted strings.
std::optional<std::vector<std::string>> parse_list_at(std::string_view text, std::size_t pos) {
  std::vector<std::string> values;
  std::size_t i = pos + 1;
  const auto skip_ws = [&] {
    while (i < text.size() && is_space(text[i])) ++i;
  };
  skip_ws();
  if (i < text.size() && text[i] == ']') return values;
  for (;;) {
    skip_ws();
    if (i >= text.size()) return std::nullopt;
    const char quote = text[i];
    if (quote != '\'' && quote != '"') return std::nullopt;
    ++i;
    std::string value;
    bool closed = false;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '\\' && i + 1 < text.size()) {
        const char e = text[i + 1];
        switch (e) {
          case 'n': value.push_back('\n'); break;
          case 't': value.push_back('\t'); break;
          case 'r': value.push_back('\r'); break;
          default: value.push_back(e);
        }
        i += 2;
        continue;
      }
      if (c == quote) {
        // A quote only closes the string when a separator follows; this
        // tolerates unescaped apostrophes such as 'Schindler's List (1993)'.
        std::size_t j = i + 1;
        while (j < text.size() && is_space(text[j])) ++j;
        if (j < text.size() && (text[j] == ',' || text[j] == ']')) {
          i = i + 1;
          closed = true;
          break;
        }
      }
      if (c == '\n') return std::nullopt;
      value.push_back(c);
      ++i;
    }
    if (!closed) return std::nullopt;
    values.push_back(std::move(value));
    skip_ws();
    if (i >= text.size()) return std::nullopt;
    if (text[i] == ']') return values;
    if (text[i] != ',') return std::nullopt;
    ++i;
    skip_ws();
    if (i < text.size() && text[i] == ']') return values;
  }
}

}  // namespace

std::string_view to_string(ParseStatus status) {
  switch (status) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::partial: return "partial";
    case ParseStatus::unparseable: return "unparseable";
  }
  return "unparseable";
}

ParseStatus parse_status_from_string(std::string_view text) {
  if (text == "ok") return ParseStatus::ok;
  if (text == "partial") return ParseStatus::partial;
  if (text == "unparseable") return ParseStatus::unparseable;
  throw InputError("unknown parse status '" + std::string(text) + "'");
}

PromptTemplate PromptTemplate::for_domain(Domain domain) {
  const auto w = words_for(domain);
  std::string text(kRules);
  text += fmt::format(
      "You are proficient in recommending new {{domain_noun}} for users to {0} based on their background, {1}, "
      "or a combination of both.\n"
      "{{persona}}{{history}}"
      "From the candidates listed below, recommend the next {{n_items}} {{domain_noun}} for the user to {0} based "
      "on the user's background, {1}, or a combination of both.\n"
      "Format your response as a Python list of item names. The list must be ranked from the most likely to the "
      "least likely {{domain_noun}}.\n"
      "Candidates: {{candidates}}\n",
      w.verb, w.history);
  return PromptTemplate(std::move(text));
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing or unreadable prompt template", path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return PromptTemplate(buffer.str());
}

std::string python_list_literal(const std::vector<std::string>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    const auto& v = values[i];
    const bool has_single = v.find('\'') != std::string::npos;
    const bool has_double = v.find('"') != std::string::npos;
    const char quote = (has_single && !has_double) ? '"' : '\'';
    out.push_back(quote);
    for (char c : v) {
      switch (c) {
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
          if (c == quote) out.push_back('\\');
          out.push_back(c);
      }
    }
    out.push_back(quote);
  }
  out += "]";
  return out;
}

std::string persona_sentence(Domain domain, const ProxyKey& key) {
  if (key.empty()) return "";
  AttributeMap rest = key.bindings();
  const auto take = [&](std::string_view name) -> std::optional<std::string> {
    auto it = rest.find(name);
    if (it == rest.end()) return std::nullopt;
    std::string v = it->second;
    rest.erase(it);
    return v;
  };
  std::vector<std::string> parts;
  if (domain == Domain::movies || domain == Domain::music) {
    if (auto age = take("age")) parts.push_back(*age + " years old");
    if (auto gender = take("gender")) parts.push_back(gender_word(*gender));
    if (domain == Domain::movies) {
      auto occupation = take("occupation");
      parts.push_back(occupation ? *occupation : "user");
    } else {
      parts.push_back("listener");
      auto country = take("country");
      auto region = take("region");
      if (country && region) parts.push_back("from " + *country + ", " + *region);
      else if (country) parts.push_back("from " + *country);
      else if (region) parts.push_back("in " + *region);
    }
  } else {
    parts.push_back("user");
  }
  std::string sentence = "The user is a";
  for (const auto& p : parts) sentence += " " + p;
  if (!rest.empty()) {
    sentence += domain == Domain::synthetic ? " in the group" : " with";
    bool first = true;
    for (const auto& [k, v] : rest) {
      sentence += (first ? " " : ", ") + k + "=" + v;
      first = false;
    }
  }
  sentence += ".";
  return sentence;
}

PromptText render_prompt(const EvalCase& c, const TitleMap& titles, const PromptTemplate& tmpl, std::size_t n_items) {
  const auto w = words_for(c.domain);
  std::vector<std::string> candidate_titles;
  candidate_titles.reserve(c.candidates.size());
  for (const auto& id : c.candidates) candidate_titles.push_back(*lookup_title(titles, id));

  std::string history;
  if (!c.history.empty()) {
    std::vector<std::string> history_titles;
    for (const auto& id : c.history) history_titles.push_back(*lookup_title(titles, id));
    history = fmt::format("The user has previously {} the following {}: {}.\n", w.past, w.plural,
                          python_list_literal(history_titles));
  }
  std::string persona = persona_sentence(c.domain, c.proxy_key);
  if (!persona.empty()) persona += "\n";

  const std::unordered_map<std::string_view, std::string> values{
      {"persona", persona},
      {"history", history},
      {"candidates", python_list_literal(candidate_titles)},
      {"n_items", std::to_string(n_items)},
      {"domain_noun", std::string(w.noun)},
  };
  return PromptText{c.case_id, substitute(tmpl.text(), values)};
}

PromptText render_prompt(const EvalCase& c, const TitleMap& titles) {
  return render_prompt(c, titles, PromptTemplate::for_domain(c.domain));
}

std::optional<std::vector<std::string>> extract_string_list(std::string_view text) {
  for (std::size_t pos = text.find('['); pos != std::string_view::npos; pos = text.find('[', pos + 1)) {
    if (auto values = parse_list_at(text, pos)) return values;
  }
  return std::nullopt;
}

RankedResponse parse_response(std::string_view text, const EvalCase& c, const TitleMap& titles,
                              std::size_t n_items) {
  RankedResponse response;
  response.case_id = c.case_id;
  response.raw = std::string(text);

  const auto names = extract_string_list(text);
  if (!names) return response;

  std::unordered_map<std::string, std::size_t> exact;
  std::unordered_map<std::string, std::size_t> normalized;
  for (std::size_t i = 0; i < c.candidates.size(); ++i) {
    auto it = titles.find(c.candidates[i]);
    if (it == titles.end()) continue;
    exact.emplace(it->second, i);
    normalized.emplace(normalize_title(it->second), i);
  }
  std::vector<bool> used(c.candidates.size(), false);
  for (const auto& name : *names) {
    if (response.ranked.size() == n_items) break;
    std::optional<std::size_t> pos;
    if (auto it = exact.find(name); it != exact.end()) {
      pos = it->second;
    } else if (auto jt = normalized.find(normalize_title(name)); jt != normalized.end()) {
      pos = jt->second;
    }
    if (!pos || used[*pos]) continue;
    used[*pos] = true;
    response.ranked.push_back(c.candidates[*pos]);
  }
  if (response.ranked.size() == n_items) response.status = ParseStatus::ok;
  else if (!response.ranked.empty()) response.status = ParseStatus::partial;
  return response;
}

}  // namespace bxent
