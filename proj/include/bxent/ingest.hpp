#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "bxent/dataset.hpp"

namespace bxent {

/// Rows dropped while parsing (e.g. Last.fm plays without a track name).
struct SkipReport {
  struct Entry {
    std::string file;
    std::size_t line = 0;
    std::string reason;
  };
  std::vector<Entry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  /// One line per entry: "file:line<TAB>reason".
  void write(std::ostream& out) const;
};

/// MovieLens-1M directory (ratings.dat, users.dat, movies.dat; "::"-delimited).
/// Users get attributes gender (M/F), age (bucket label) and occupation (name).
Dataset parse_movielens(const std::filesystem::path& dir);

/// Last.fm-1K directory: the play log
/// (userid-timestamp-artid-artname-traid-traname.tsv) and userid-profile.tsv.
/// Items are (artist, track) pairs titled "Artist - Track".
Dataset parse_lastfm(const std::filesystem::path& dir, SkipReport* skipped = nullptr);

inline constexpr std::string_view kRegionEurope = "Europe";
inline constexpr std::string_view kRegionNorthAmerica = "North America";
inline constexpr std::string_view kRegionSouthAmerica = "South America";
inline constexpr std::string_view kRegionUnitedKingdom = "United Kingdom";
inline constexpr std::string_view kRegionOther = "Other";

/// Country name -> one of Europe, North America, South America,
/// United Kingdom, Other. The United Kingdom is its own region.
std::string derive_region(std::string_view country);

struct PreprocessRules {
  /// Users whose occupation is listed here are removed.
  std::vector<std::string> drop_occupations;
  /// When non-empty, keep only users whose combination of these attributes
  /// is shared by at least min_group_users users (computed once).
  std::vector<std::string> group_attributes;
  std::size_t min_group_users = 0;
  /// Adds a "region" attribute from "country".
  bool add_region = false;
  /// When non-empty, keep only users whose region is listed.
  std::vector<std::string> keep_regions;
  /// Keep only users with at least this many interaction events.
  std::uint64_t min_user_events = 0;

  static PreprocessRules none() { return {}; }
  static PreprocessRules movies();
  static PreprocessRules music();

  bool empty() const;
  std::string describe() const;
};

/// Throws PreprocessError when no users survive.
Dataset preprocess(const Dataset& dataset, const PreprocessRules& rules);

}  // namespace bxent
