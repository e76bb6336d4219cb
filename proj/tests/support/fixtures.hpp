#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bxent/dataset.hpp"

namespace bxent::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "bxent");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct MovieLensShape {
  std::size_t users = 1500;
  std::size_t movies = 600;
  /// Every user rates at least this many movies.
  std::size_t min_ratings = 20;
  /// Mean number of ratings beyond the minimum (log-normal tail).
  double mean_extra = 80.0;
  /// Exact total when non-zero; activity is adjusted to hit it.
  std::size_t total_ratings = 0;
  /// Zipf exponent of movie popularity.
  double zipf = 0.9;
  std::uint64_t seed = 1;
};

struct MovieLensCounts {
  std::size_t users = 0;
  std::size_t movies = 0;
  std::size_t ratings = 0;
};

/// Writes users.dat, movies.dat and ratings.dat in the MovieLens-1M layout
/// (Latin-1 titles included). Demographics follow MovieLens-like marginals.
MovieLensCounts write_movielens(const std::filesystem::path& dir, const MovieLensShape& shape = {});

/// 6,040 users, 3,883 movies and exactly 1,000,209 ratings.
MovieLensShape full_scale_movielens_shape();

struct LastfmCounts {
  std::size_t users = 0;
  std::size_t plays = 0;
  std::size_t skipped_plays = 0;
};

/// Writes userid-profile.tsv and the listening log in the Last.fm-1K layout.
LastfmCounts write_lastfm(const std::filesystem::path& dir, std::size_t users = 40, std::size_t plays_per_user = 60,
                          std::uint64_t seed = 1);

/// Loads the preprocessed MovieLens-shaped fixture, generating it once per
/// process into a temp dir.
const Dataset& movielens_fixture();

}  // namespace bxent::testing
