#include "bxent/store.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bxent/error.hpp"
#include "bxent/hash.hpp"
#include "bxent/text.hpp"

namespace bxent {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFormat = "bxent-store-1";

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file", path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing or unreadable file", path.string());
  return in;
}

std::vector<std::string> expect_row(std::string_view line, std::size_t columns, const fs::path& path,
                                    std::size_t line_no) {
  auto parts = split(line, "\t");
  if (parts.size() != columns) {
    throw InputError(fmt::format("expected {} columns, found {}", columns, parts.size()), path.string(),
                     line_no);
  }
  std::vector<std::string> fields;
  fields.reserve(parts.size());
  for (auto p : parts) fields.push_back(unescape_tsv_field(p));
  return fields;
}

}  // namespace

std::string escape_tsv_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (char c : field) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_tsv_field(std::string_view field) {
  std::string out;
  out.reserve(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] != '\\' || i + 1 == field.size()) {
      out.push_back(field[i]);
      continue;
    }
    switch (field[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: out.push_back(field[i]);
    }
  }
  return out;
}

void save_store(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "items.tsv");
    out << "item_id\ttitle\n";
    for (const auto& item : dataset.items()) {
      out << escape_tsv_field(item.id) << '\t' << escape_tsv_field(item.title) << '\n';
    }
  }
  const auto attributes = dataset.attribute_names();
  {
    auto out = open_out(dir / "users.tsv");
    out << "user_id";
    for (const auto& name : attributes) out << '\t' << escape_tsv_field(name);
    out << '\n';
    for (const auto& user : dataset.users()) {
      out << escape_tsv_field(user.id);
      for (const auto& name : attributes) {
        out << '\t';
        if (auto it = user.attributes.find(name); it != user.attributes.end()) out << escape_tsv_field(it->second);
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "interactions.tsv");
    out << "user_id\titem_id\ttimestamp\tweight\n";
    for (const auto& x : dataset.interactions()) {
      out << escape_tsv_field(dataset.user(x.user).id) << '\t' << escape_tsv_field(dataset.item(x.item).id)
          << '\t';
      if (x.has_timestamp()) out << x.timestamp;
      out << '\t' << x.weight << '\n';
    }
  }
  nlohmann::ordered_json manifest;
  manifest["format"] = kFormat;
  manifest["name"] = dataset.name();
  manifest["domain"] = to_string(dataset.domain());
  manifest["preprocessing"] = dataset.preprocessing();
  manifest["fingerprint"] = to_hex64(dataset.fingerprint());
  manifest["items"] = dataset.item_count();
  manifest["users"] = dataset.user_count();
  manifest["interactions"] = dataset.interactions().size();
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

Dataset load_store(const fs::path& dir) {
  nlohmann::json manifest;
  {
    auto in = open_in(dir / "manifest.json");
    try {
      manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed manifest: ") + e.what(), (dir / "manifest.json").string());
    }
  }
  if (manifest.value("format", "") != kFormat) {
    throw InputError("unsupported store format", (dir / "manifest.json").string());
  }
  DatasetBuilder builder(manifest.value("name", ""), domain_from_string(manifest.value("domain", "synthetic")));
  builder.set_preprocessing(manifest.value("preprocessing", ""));

  std::string line;
  {
    const auto path = dir / "items.tsv";
    auto in = open_in(path);
    std::size_t line_no = 0;
    read_line(in, line);
    ++line_no;
    while (read_line(in, line)) {
      ++line_no;
      auto f = expect_row(line, 2, path, line_no);
      try {
        builder.add_item(std::move(f[0]), std::move(f[1]));
      } catch (const InputError& e) {
        throw InputError(e.what(), path.string(), line_no);
      }
    }
  }
  {
    const auto path = dir / "users.tsv";
    auto in = open_in(path);
    if (!read_line(in, line)) throw InputError("missing header", path.string(), 1);
    std::vector<std::string> header;
    for (auto p : split(line, "\t")) header.push_back(unescape_tsv_field(p));
    std::size_t line_no = 1;
    while (read_line(in, line)) {
      ++line_no;
      auto f = expect_row(line, header.size(), path, line_no);
      AttributeMap attributes;
      for (std::size_t i = 1; i < f.size(); ++i) {
        if (!f[i].empty()) attributes.emplace(header[i], f[i]);
      }
      try {
        builder.add_user(std::move(f[0]), std::move(attributes));
      } catch (const InputError& e) {
        throw InputError(e.what(), path.string(), line_no);
      }
    }
  }
  {
    const auto path = dir / "interactions.tsv";
    auto in = open_in(path);
    read_line(in, line);
    std::size_t line_no = 1;
    while (read_line(in, line)) {
      ++line_no;
      auto f = expect_row(line, 4, path, line_no);
      auto user = builder.find_user(f[0]);
      auto item = builder.find_item(f[1]);
      if (!user || !item) throw InputError("dangling user or item reference", path.string(), line_no);
      try {
        const std::int64_t ts = f[2].empty() ? kNoTimestamp : parse_int(f[2]);
        builder.add_interaction(*user, *item, ts, static_cast<std::uint32_t>(parse_int(f[3])));
      } catch (const std::invalid_argument& e) {
        throw InputError(e.what(), path.string(), line_no);
      } catch (const InputError& e) {
        throw InputError(e.what(), path.string(), line_no);
      }
    }
  }
  Dataset dataset = std::move(builder).build();
  const std::string expected = manifest.value("fingerprint", "");
  if (!expected.empty() && expected != to_hex64(dataset.fingerprint())) {
    throw InputError("fingerprint mismatch (store modified or corrupt)", (dir / "manifest.json").string());
  }
  return dataset;
}

}  // namespace bxent
