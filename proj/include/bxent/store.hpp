#pragma once

#include <filesystem>

#include "bxent/dataset.hpp"

namespace bxent {

/// Canonical store: items.tsv, users.tsv, interactions.tsv (UTF-8, with
/// header rows) plus manifest.json carrying name, domain, preprocessing and
/// fingerprint. Tabs, newlines and backslashes inside fields are escaped.
void save_store(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_store(const std::filesystem::path& dir);

std::string escape_tsv_field(std::string_view field);
std::string unescape_tsv_field(std::string_view field);

}  // namespace bxent
