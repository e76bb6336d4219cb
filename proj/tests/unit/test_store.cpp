#include <doctest.h>

#include <fstream>
#include <sstream>

#include "bxent/error.hpp"
#include "bxent/ingest.hpp"
#include "bxent/rng.hpp"
#include "bxent/store.hpp"
#include "fixtures.hpp"

using namespace bxent;
using testing::TempDir;

namespace {

Dataset awkward_dataset() {
  DatasetBuilder b("awkward", Domain::music);
  b.set_preprocessing("custom rules");
  b.add_item("t1", "Tab\there");
  b.add_item("t2", "New\nline \\ backslash");
  b.add_item("t3", "Caf\xC3\xA9 \xE2\x80\x94 plain");
  const auto u1 = b.add_user("u1", AttributeMap{{"country", "Korea, Republic of"}, {"gender", "F"}});
  const auto u2 = b.add_user("u2", AttributeMap{{"age", "22"}});
  b.add_interaction(u1, 0, 100, 2);
  b.add_interaction(u1, 2);
  b.add_interaction(u2, 1, -5, 1);
  b.add_interaction(u2, 1, 7, 3);
  return std::move(b).build();
}

}  // namespace

TEST_CASE("escape round-trip") {
  Rng rng(6);
  const std::string alphabet = "ab\\\t\n\rnt ";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (std::size_t k = rng.index(12); k > 0; --k) s += alphabet[rng.index(alphabet.size())];
    const auto e = escape_tsv_field(s);
    REQUIRE(e.find_first_of("\t\n\r") == std::string::npos);
    REQUIRE(unescape_tsv_field(e) == s);
  }
}

TEST_CASE("store round-trip preserves everything") {
  TempDir dir;
  const auto ds = awkward_dataset();
  save_store(ds, dir.path());
  const auto back = load_store(dir.path());
  CHECK(back == ds);
  CHECK(back.name() == ds.name());
  CHECK(back.preprocessing() == ds.preprocessing());
  CHECK(back.fingerprint() == ds.fingerprint());
  CHECK(back.user_events(1) == 4);
}

TEST_CASE("store round-trip of a parsed MovieLens fixture") {
  TempDir dir;
  testing::MovieLensShape shape;
  shape.users = 200;
  shape.movies = 120;
  testing::write_movielens(dir / "raw", shape);
  const auto ds = parse_movielens(dir / "raw");
  save_store(ds, dir / "store");
  CHECK(load_store(dir / "store") == ds);
}

TEST_CASE("load_store detects tampering and bad rows") {
  TempDir dir;
  save_store(awkward_dataset(), dir.path());
  {
    std::ofstream out(dir / "interactions.tsv", std::ios::app);
    out << "u2\tt3\t\t1\n";
  }
  CHECK_THROWS_AS(load_store(dir.path()), InputError);
  {
    std::ofstream out(dir / "interactions.tsv", std::ios::app);
    out << "u9\tt3\t\t1\n";
  }
  try {
    load_store(dir.path());
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(e.line() > 0);
  }
  std::filesystem::remove(dir / "manifest.json");
  CHECK_THROWS_AS(load_store(dir.path()), InputError);
}

TEST_CASE("dataset builder merges duplicate interactions") {
  DatasetBuilder b("d", Domain::synthetic);
  b.add_item("a", "A");
  b.add_item("b", "B");
  const auto u = b.add_user("u", {});
  b.add_interaction(u, 1, kNoTimestamp, 2);
  b.add_interaction(u, 0);
  b.add_interaction(u, 1);
  CHECK_THROWS_AS(b.add_interaction(u, 5), InputError);
  CHECK_THROWS_AS(b.add_interaction(u, 0, kNoTimestamp, 0), InputError);
  CHECK_THROWS_AS(b.add_item("a", "again"), InputError);
  CHECK_THROWS_AS(b.add_user("u", {}), InputError);
  const auto ds = std::move(b).build();
  const auto row = ds.user_items(0);
  REQUIRE(row.size() == 2);
  CHECK(row[0].item == 0);
  CHECK(row[0].events == 1);
  CHECK(row[1].events == 3);
  CHECK(ds.user_has_item(0, 1));
  CHECK(ds.item_events(1) == 3);
}
