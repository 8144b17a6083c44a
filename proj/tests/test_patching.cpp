#include <doctest.h>

#include "plants/patching.hpp"
#include "plants/rng.hpp"

using namespace plants;

namespace {

std::vector<double> random_series(int64_t l, int64_t c, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(l * c));
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("patching") {

TEST_CASE("ceiling arithmetic: L=10 w=3 -> M=4 pad=2") {
  auto s = random_series(10, 2, 1);
  PatchView v = segment(s, 10, 2, 3);
  CHECK(v.count == 4);
  CHECK(v.pad_len == 2);
}

TEST_CASE("exact division: L=12 w=4 -> M=3 pad=0") {
  auto s = random_series(12, 1, 2);
  PatchView v = segment(s, 12, 1, 4);
  CHECK(v.count == 3);
  CHECK(v.pad_len == 0);
}

TEST_CASE("single window: L=10 w=16 -> M=1 pad=6") {
  auto s = random_series(10, 3, 3);
  PatchView v = segment(s, 10, 3, 16);
  CHECK(v.count == 1);
  CHECK(v.pad_len == 6);
  // 6/16 padding is under 50%, so the lone window stays usable
  CHECK(v.usable[0] == 1);
}

TEST_CASE("non-positive window errors") {
  auto s = random_series(10, 1, 4);
  CHECK_THROWS_AS(segment(s, 10, 1, 0), ValueError);
  CHECK_THROWS_AS(segment(s, 10, 1, -3), ValueError);
}

TEST_CASE("round-trip is bit-exact for all tested (L, w)") {
  for (int64_t l : {1, 5, 10, 37, 100}) {
    for (int w : {1, 2, 3, 7, 10, 100, 120}) {
      auto s = random_series(l, 3, static_cast<uint64_t>(l * 1000 + w));
      PatchView v = segment(s, l, 3, w);
      CHECK(v.count * v.window == l + v.pad_len);
      CHECK(v.pad_len >= 0);
      CHECK(v.pad_len < v.window);
      auto back = unsegment(v);
      REQUIRE(back.size() == s.size());
      for (size_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i]);
    }
  }
}

TEST_CASE("padded region of the last window is identically zero") {
  auto s = random_series(10, 2, 5);
  PatchView v = segment(s, 10, 2, 4);
  REQUIRE(v.pad_len == 2);
  for (int64_t t = 10; t < 12; ++t)
    for (int64_t ch = 0; ch < 2; ++ch)
      CHECK(v.padded[static_cast<size_t>(t * 2 + ch)] == 0.0);
}

TEST_CASE("prefix of length L identical across granularities") {
  auto s = random_series(100, 2, 6);
  PeriodSet ps = periods_from_windows({25, 10, 7}, 100);
  auto views = multi_segment(s, 100, 2, ps);
  REQUIRE(views.size() == 3);
  for (const auto& v : views)
    for (int64_t i = 0; i < 100 * 2; ++i) CHECK(v.padded[static_cast<size_t>(i)] == s[static_cast<size_t>(i)]);
}

TEST_CASE("multi_segment examples: {25,10} on L=100, {7} on L=100") {
  auto s = random_series(100, 1, 7);
  auto views = multi_segment(s, 100, 1, periods_from_windows({25, 10}, 100));
  CHECK(views[0].count == 4);
  CHECK(views[0].pad_len == 0);
  CHECK(views[1].count == 10);
  CHECK(views[1].pad_len == 0);

  auto v7 = multi_segment(s, 100, 1, periods_from_windows({7}, 100));
  CHECK(v7[0].count == 15);
  CHECK(v7[0].pad_len == 5);

  PeriodSet empty;
  CHECK_THROWS_AS(multi_segment(s, 100, 1, empty), ValueError);
}

TEST_CASE("windows with more than 50% padding are masked") {
  // L=10, w=8: window 1 holds rows [8,10) -> 6 of 8 padded -> masked.
  auto s = random_series(10, 1, 8);
  PatchView v = segment(s, 10, 1, 8);
  REQUIRE(v.count == 2);
  CHECK(v.usable[0] == 1);
  CHECK(v.usable[1] == 0);
  CHECK(v.usable_count() == 1);

  // Exactly 50% padding stays usable: L=6, w=4 -> window 1 has 2/4 padding.
  auto s2 = random_series(6, 1, 9);
  PatchView v2 = segment(s2, 6, 1, 4);
  CHECK(v2.usable[1] == 1);
}

TEST_CASE("valid_len reports the unpadded tail") {
  auto s = random_series(10, 1, 10);
  PatchView v = segment(s, 10, 1, 4);
  CHECK(v.valid_len(0) == 4);
  CHECK(v.valid_len(1) == 4);
  CHECK(v.valid_len(2) == 2);
}

}  // TEST_SUITE
