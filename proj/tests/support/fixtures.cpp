#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <unistd.h>

#include <fmt/format.h>

#include "bxent/ingest.hpp"
#include "bxent/rng.hpp"

namespace bxent::testing {

namespace fs = std::filesystem;

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() / fmt::format("{}-{}-{}", tag, ::getpid(), counter++);
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

namespace {

std::size_t pick_weighted(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

std::vector<double> cumulate(std::vector<double> w) {
  std::partial_sum(w.begin(), w.end(), w.begin());
  return w;
}

}  // namespace

MovieLensShape full_scale_movielens_shape() {
  MovieLensShape s;
  s.users = 6040;
  s.movies = 3883;
  s.min_ratings = 20;
  s.mean_extra = 145.0;
  s.total_ratings = 1'000'209;
  s.zipf = 0.8;
  s.seed = 2024;
  return s;
}

MovieLensCounts write_movielens(const fs::path& dir, const MovieLensShape& shape) {
  fs::create_directories(dir);
  Rng rng(shape.seed);

  // Marginals loosely follow the real data: mostly male, 25-34 largest,
  // a handful of dominant occupations.
  const std::array<int, 7> age_codes{1, 18, 25, 35, 45, 50, 56};
  const auto age_cum = cumulate({0.04, 0.18, 0.35, 0.20, 0.09, 0.08, 0.06});
  std::vector<double> occ_w(21);
  for (std::size_t o = 0; o < occ_w.size(); ++o) occ_w[o] = 1.0 / std::pow(static_cast<double>((o * 7) % 21 + 1), 1.1);
  occ_w[0] = occ_w[5];
  const auto occ_cum = cumulate(occ_w);

  {
    std::ofstream out(dir / "users.dat", std::ios::binary);
    for (std::size_t u = 1; u <= shape.users; ++u) {
      const char gender = rng.uniform() < 0.72 ? 'M' : 'F';
      out << u << "::" << gender << "::" << age_codes[pick_weighted(age_cum, rng)] << "::"
          << pick_weighted(occ_cum, rng) << "::" << fmt::format("{:05}", rng.index(100000)) << '\n';
    }
  }
  {
    std::ofstream out(dir / "movies.dat", std::ios::binary);
    for (std::size_t m = 1; m <= shape.movies; ++m) {
      // Every 50th title carries a Latin-1 byte, like the original file.
      const std::string title = m % 50 == 0 ? fmt::format("Caf\xE9 Story {} ({})", m, 1920 + m % 80)
                                            : fmt::format("Movie Title {} ({})", m, 1920 + m % 80);
      out << m << "::" << title << "::Drama|Comedy\n";
    }
  }

  std::vector<std::size_t> activity(shape.users);
  for (auto& a : activity) {
    const double extra = shape.mean_extra * std::exp(0.9 * rng.normal() - 0.405);
    a = std::min(shape.movies, shape.min_ratings + static_cast<std::size_t>(extra));
  }
  if (shape.total_ratings > 0) {
    std::size_t total = std::accumulate(activity.begin(), activity.end(), std::size_t{0});
    while (total < shape.total_ratings) {
      auto& a = activity[rng.index(activity.size())];
      if (a < shape.movies) {
        ++a;
        ++total;
      }
    }
    while (total > shape.total_ratings) {
      auto& a = activity[rng.index(activity.size())];
      if (a > shape.min_ratings) {
        --a;
        --total;
      }
    }
  }

  std::vector<double> pop(shape.movies);
  for (std::size_t m = 0; m < shape.movies; ++m) pop[m] = 1.0 / std::pow(static_cast<double>(m + 1), shape.zipf);
  // Shuffle popularity ranks so movie ids carry no order.
  rng.shuffle(pop);
  const auto pop_cum = cumulate(pop);

  MovieLensCounts counts{shape.users, shape.movies, 0};
  std::ofstream out(dir / "ratings.dat", std::ios::binary);
  std::string buffer;
  std::vector<char> seen(shape.movies);
  std::vector<std::size_t> chosen;
  for (std::size_t u = 0; u < shape.users; ++u) {
    std::fill(seen.begin(), seen.end(), 0);
    chosen.clear();
    std::size_t attempts = 0;
    while (chosen.size() < activity[u]) {
      std::size_t m = ++attempts < 50 * activity[u] ? pick_weighted(pop_cum, rng) : rng.index(shape.movies);
      if (seen[m]) continue;
      seen[m] = 1;
      chosen.push_back(m);
    }
    std::int64_t ts = 956703932 + static_cast<std::int64_t>(rng.index(80000000));
    for (auto m : chosen) {
      buffer += fmt::format("{}::{}::{}::{}\n", u + 1, m + 1, 1 + rng.index(5), ts);
      ts += 1 + static_cast<std::int64_t>(rng.index(600));
    }
    counts.ratings += chosen.size();
    if (buffer.size() > (1 << 20)) {
      out << buffer;
      buffer.clear();
    }
  }
  out << buffer;
  return counts;
}

LastfmCounts write_lastfm(const fs::path& dir, std::size_t users, std::size_t plays_per_user, std::uint64_t seed) {
  fs::create_directories(dir);
  Rng rng(seed);
  const std::array<const char*, 8> countries{"United States", "Germany", "United Kingdom", "Brazil",
                                             "Japan", "Poland", "Canada", ""};
  LastfmCounts counts;
  {
    std::ofstream out(dir / "userid-profile.tsv", std::ios::binary);
    out << "#id\tgender\tage\tcountry\tregistered\n";
    for (std::size_t u = 1; u <= users; ++u) {
      const char* gender = u % 7 == 0 ? "" : (rng.uniform() < 0.7 ? "m" : "f");
      const std::string age = u % 5 == 0 ? "" : std::to_string(18 + rng.index(30));
      out << fmt::format("user_{:06}\t{}\t{}\t{}\tFeb 23, 2006\n", u, gender, age, countries[rng.index(countries.size())]);
    }
    counts.users = users;
  }
  std::ofstream out(dir / "userid-timestamp-artid-artname-traid-traname.tsv", std::ios::binary);
  for (std::size_t u = 1; u <= users; ++u) {
    for (std::size_t p = 0; p < plays_per_user; ++p) {
      const std::size_t artist = rng.index(12);
      const std::size_t track = rng.index(8);
      const bool empty_track = rng.index(40) == 0;
      out << fmt::format("user_{:06}\t2009-0{}-{:02}T{:02}:{:02}:{:02}Z\tart-{}\tArtist {}\ttr-{}-{}\t{}\n", u,
                         1 + rng.index(9), 1 + rng.index(28), rng.index(24), rng.index(60), rng.index(60), artist,
                         artist, artist, track, empty_track ? "" : fmt::format("Track {}", track));
      if (empty_track) {
        ++counts.skipped_plays;
      } else {
        ++counts.plays;
      }
    }
  }
  return counts;
}

const Dataset& movielens_fixture() {
  static const std::unique_ptr<Dataset> dataset = [] {
    TempDir dir("bxent-ml");
    write_movielens(dir.path());
    return std::make_unique<Dataset>(preprocess(parse_movielens(dir.path()), PreprocessRules::movies()));
  }();
  return *dataset;
}

}  // namespace bxent::testing
