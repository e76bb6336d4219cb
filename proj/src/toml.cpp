#include "bxent/toml.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bxent/error.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace {

using json = nlohmann::ordered_json;

bool is_bare_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Parser {
 public:
  Parser(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

  json parse() {
    json root = json::object();
    json* current = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        current = parse_header(root);
      } else {
        parse_keyval(*current);
      }
      expect_line_end();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(fmt::format("{}:{}: {}", source_, line_, message));
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const { return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0'; }
  char get() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  bool starts_with(std::string_view s) const { return text_.substr(pos_).starts_with(s); }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }
  void skip_blank_lines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (peek() == '\r' && peek(1) == '\n') ++pos_;
      if (peek() == '\n') {
        get();
        continue;
      }
      return;
    }
  }
  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (peek() == '\r' || peek() == '\n') {
        get();
        continue;
      }
      return;
    }
  }
  void expect_line_end() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') ++pos_;
    if (peek() != '\n') fail("expected end of line");
    get();
  }

  std::vector<std::string> parse_key() {
    std::vector<std::string> parts;
    for (;;) {
      skip_ws();
      if (peek() == '"') {
        parts.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        parts.push_back(parse_literal_string());
      } else {
        const std::size_t start = pos_;
        while (!eof() && is_bare_char(peek())) ++pos_;
        if (pos_ == start) fail("expected a key");
        parts.emplace_back(text_.substr(start, pos_ - start));
      }
      skip_ws();
      if (peek() != '.') return parts;
      ++pos_;
    }
  }

  static std::string dotted(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += '.';
      out += p;
    }
    return out;
  }

  json* descend(json& table, const std::string& key, bool allow_array) {
    if (!table.contains(key)) table[key] = json::object();
    json& next = table[key];
    if (next.is_array() && allow_array && !next.empty() && next.back().is_object()) return &next.back();
    if (!next.is_object()) fail("key '" + key + "' is not a table");
    return &next;
  }

  json* parse_header(json& root) {
    ++pos_;
    const bool array = peek() == '[';
    if (array) ++pos_;
    auto parts = parse_key();
    if (peek() != ']') fail("expected ']'");
    ++pos_;
    if (array) {
      if (peek() != ']') fail("expected ']]'");
      ++pos_;
    }
    json* t = &root;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = descend(*t, parts[i], true);
    const std::string& last = parts.back();
    const std::string name = dotted(parts);
    if (array) {
      if (!t->contains(last)) (*t)[last] = json::array();
      json& arr = (*t)[last];
      if (!arr.is_array()) fail("'" + name + "' is not an array of tables");
      arr.push_back(json::object());
      // A fresh element may redefine sub-tables of the previous one.
      for (auto it = defined_.begin(); it != defined_.end();) {
        it = it->starts_with(name + ".") ? defined_.erase(it) : std::next(it);
      }
      return &arr.back();
    }
    if (!defined_.insert(name).second) fail("table '" + name + "' defined twice");
    return descend(*t, last, false);
  }

  void parse_keyval(json& table) {
    auto parts = parse_key();
    if (peek() != '=') fail("expected '=' after key '" + dotted(parts) + "'");
    ++pos_;
    skip_ws();
    json* t = &table;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = descend(*t, parts[i], false);
    if (t->contains(parts.back())) fail("duplicate key '" + dotted(parts) + "'");
    (*t)[parts.back()] = parse_value();
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') {
      if (starts_with("\"\"\"")) return parse_multiline_basic();
      return parse_basic_string();
    }
    if (c == '\'') {
      if (starts_with("'''")) return parse_multiline_literal();
      return parse_literal_string();
    }
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (starts_with("true")) {
      pos_ += 4;
      return true;
    }
    if (starts_with("false")) {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  std::uint32_t parse_hex(std::size_t digits) {
    std::uint32_t cp = 0;
    for (std::size_t i = 0; i < digits; ++i) {
      const char h = peek();
      cp <<= 4;
      if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
      else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
      else fail("bad unicode escape");
      ++pos_;
    }
    return cp;
  }

  void parse_escape(std::string& out) {
    const char e = peek();
    ++pos_;
    switch (e) {
      case 'b': out += '\b'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'f': out += '\f'; break;
      case 'r': out += '\r'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      case 'u': append_utf8(out, parse_hex(4)); break;
      case 'U': append_utf8(out, parse_hex(8)); break;
      default: fail(std::string("unknown escape \\") + e);
    }
  }

  std::string parse_basic_string() {
    ++pos_;
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c == '\\') {
        parse_escape(out);
      } else {
        out += c;
      }
    }
  }

  std::string parse_literal_string() {
    ++pos_;
    const std::size_t start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated literal string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  std::string parse_multiline_basic() {
    pos_ += 3;
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') get();
    std::string out;
    for (;;) {
      if (eof()) fail("unterminated multi-line string");
      if (starts_with("\"\"\"")) {
        pos_ += 3;
        return out;
      }
      const char c = get();
      if (c != '\\') {
        out += c;
        continue;
      }
      if (peek() == '\n' || peek() == '\r' || peek() == ' ' || peek() == '\t') {
        // Line-ending backslash trims following whitespace.
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r' || peek() == '\n')) get();
      } else {
        parse_escape(out);
      }
    }
  }

  std::string parse_multiline_literal() {
    pos_ += 3;
    if (peek() == '\r') ++pos_;
    if (peek() == '\n') get();
    std::string out;
    for (;;) {
      if (eof()) fail("unterminated multi-line string");
      if (starts_with("'''")) {
        pos_ += 3;
        return out;
      }
      out += get();
    }
  }

  json parse_array() {
    ++pos_;
    json arr = json::array();
    for (;;) {
      skip_array_space();
      if (peek() == ']') {
        ++pos_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_array_space();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_inline_table() {
    ++pos_;
    json t = json::object();
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return t;
    }
    for (;;) {
      parse_keyval(t);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != '}') fail("expected ',' or '}' in inline table");
      ++pos_;
      return t;
    }
  }

  json parse_number() {
    const std::size_t start = pos_;
    while (!eof() && (is_bare_char(peek()) || peek() == '+' || peek() == '.' || peek() == ':')) ++pos_;
    std::string raw(text_.substr(start, pos_ - start));
    if (raw.empty()) fail("expected a value");
    if (raw.find(':') != std::string::npos || (raw.size() >= 10 && raw[4] == '-' && raw[7] == '-')) {
      fail("date-time values are not supported");
    }
    std::string digits;
    for (char ch : raw) {
      if (ch != '_') digits += ch;
    }
    std::string_view body = digits;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) body.remove_prefix(1);
    const bool negative = !digits.empty() && digits[0] == '-';
    if (body == "inf") return negative ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    try {
      if (digits.find_first_of(".eE") == std::string::npos) {
        if (digits[0] == '+') digits.erase(0, 1);
        return parse_int(digits);
      }
      if (digits[0] == '+') digits.erase(0, 1);
      return parse_double(digits);
    } catch (const std::exception&) {
      fail("invalid value '" + raw + "'");
    }
  }

  std::string_view text_;
  std::string source_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_;
};

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20 || c == 0x7F) {
          out += fmt::format("\\u{:04X}", c);
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
  return out;
}

std::string key_text(std::string_view key) {
  if (!key.empty() && std::all_of(key.begin(), key.end(), is_bare_char)) return std::string(key);
  return quote(key);
}

std::string scalar_text(const json& v) {
  switch (v.type()) {
    case json::value_t::string: return quote(v.get_ref<const std::string&>());
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case json::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case json::value_t::number_float: {
      const double d = v.get<double>();
      if (std::isnan(d)) return "nan";
      if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
      std::string s = format_double(d);
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      return s;
    }
    case json::value_t::array: {
      std::string out = "[";
      bool first = true;
      for (const auto& e : v) {
        if (e.is_null()) continue;
        if (!first) out += ", ";
        first = false;
        out += scalar_text(e);
      }
      return out + "]";
    }
    case json::value_t::object: {
      std::string out = "{";
      bool first = true;
      for (const auto& [k, e] : v.items()) {
        if (e.is_null()) continue;
        out += first ? " " : ", ";
        first = false;
        out += key_text(k) + " = " + scalar_text(e);
      }
      return out + (first ? "}" : " }");
    }
    default: return "\"\"";
  }
}

bool is_table_array(const json& v) {
  return v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_object(); });
}

void emit_table(std::ostringstream& out, const json& table, const std::string& path) {
  for (const auto& [k, v] : table.items()) {
    if (v.is_null() || v.is_object() || is_table_array(v)) continue;
    out << key_text(k) << " = " << scalar_text(v) << '\n';
  }
  for (const auto& [k, v] : table.items()) {
    const std::string sub = path.empty() ? key_text(k) : path + "." + key_text(k);
    if (v.is_object()) {
      out << "\n[" << sub << "]\n";
      emit_table(out, v, sub);
    } else if (is_table_array(v)) {
      for (const auto& element : v) {
        out << "\n[[" << sub << "]]\n";
        emit_table(out, element, sub);
      }
    }
  }
}

}  // namespace

nlohmann::ordered_json parse_toml(std::string_view text, const std::string& source) {
  return Parser(text, source).parse();
}

nlohmann::ordered_json read_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_toml(buffer.str(), path.string());
}

std::string write_toml(const nlohmann::ordered_json& doc) {
  std::ostringstream out;
  emit_table(out, doc, "");
  std::string text = out.str();
  if (text.starts_with("\n")) text.erase(0, 1);
  return text;
}

}  // namespace bxent
