#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "plants/rng.hpp"
#include "plants/similarity.hpp"

using namespace plants;

namespace {

// Brute-force oracle for ncc_at_lag: Pearson on the overlap, independent of
// the library code path.
double ncc_oracle(const std::vector<double>& x, const std::vector<double>& y, int64_t tau) {
  int64_t n = static_cast<int64_t>(x.size()) - tau;
  double mx = 0, my = 0;
  for (int64_t t = 0; t < n; ++t) {
    mx += x[static_cast<size_t>(tau + t)];
    my += y[static_cast<size_t>(t)];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (int64_t t = 0; t < n; ++t) {
    sxy += (x[static_cast<size_t>(tau + t)] - mx) * (y[static_cast<size_t>(t)] - my);
    sxx += (x[static_cast<size_t>(tau + t)] - mx) * (x[static_cast<size_t>(tau + t)] - mx);
    syy += (y[static_cast<size_t>(t)] - my) * (y[static_cast<size_t>(t)] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

// Brute-force oracle for mxcorr: per channel, center/normalize the window,
// scan every circular lag by direct summation, average over channels.
double mxcorr_oracle(const std::vector<double>& x, const std::vector<double>& y, int64_t w,
                     int64_t c) {
  double total = 0.0;
  for (int64_t ch = 0; ch < c; ++ch) {
    std::vector<double> a(static_cast<size_t>(w)), b(static_cast<size_t>(w));
    double ma = 0, mb = 0;
    for (int64_t t = 0; t < w; ++t) {
      ma += x[static_cast<size_t>(t * c + ch)];
      mb += y[static_cast<size_t>(t * c + ch)];
    }
    ma /= w;
    mb /= w;
    double na = 0, nb = 0;
    for (int64_t t = 0; t < w; ++t) {
      a[static_cast<size_t>(t)] = x[static_cast<size_t>(t * c + ch)] - ma;
      b[static_cast<size_t>(t)] = y[static_cast<size_t>(t * c + ch)] - mb;
      na += a[static_cast<size_t>(t)] * a[static_cast<size_t>(t)];
      nb += b[static_cast<size_t>(t)] * b[static_cast<size_t>(t)];
    }
    if (na == 0 || nb == 0) continue;
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    for (auto& v : a) v /= na;
    for (auto& v : b) v /= nb;
    double best = -2.0;
    for (int64_t tau = 0; tau < w; ++tau) {
      double acc = 0.0;
      for (int64_t t = 0; t < w; ++t) acc += a[static_cast<size_t>((t + tau) % w)] * b[static_cast<size_t>(t)];
      best = std::max(best, acc);
    }
    total += best;
  }
  return total / static_cast<double>(c);
}

// Exhaustive DTW oracle: enumerate every monotone path on small grids.
double dtw_enum(const std::vector<double>& x, const std::vector<double>& y, size_t i, size_t j) {
  double cost = std::abs(x[i] - y[j]);
  if (i == 0 && j == 0) return cost;
  double best = HUGE_VAL;
  if (i > 0) best = std::min(best, dtw_enum(x, y, i - 1, j));
  if (j > 0) best = std::min(best, dtw_enum(x, y, i, j - 1));
  if (i > 0 && j > 0) best = std::min(best, dtw_enum(x, y, i - 1, j - 1));
  return cost + best;
}

std::vector<double> random_window(int64_t w, int64_t c, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<size_t>(w * c));
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_SUITE("similarity") {

TEST_CASE("ncc_at_lag: self-correlation 1, sign flip -1") {
  auto x = random_window(16, 1, 1);
  std::vector<double> neg_x(x.size());
  for (size_t i = 0; i < x.size(); ++i) neg_x[i] = -x[i];
  CHECK(ncc_at_lag(x, x, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ncc_at_lag(x, neg_x, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ncc_at_lag matches the direct-summation oracle at every lag") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto x = random_window(20, 1, seed * 2);
    auto y = random_window(20, 1, seed * 2 + 1);
    for (int64_t tau = 0; tau <= 18; ++tau)
      CHECK(std::abs(ncc_at_lag(x, y, tau) - ncc_oracle(x, y, tau)) < 1e-12);
  }
}

TEST_CASE("ncc_at_lag: lag out of range errors; zero-variance overlap is 0") {
  auto x = random_window(8, 1, 3);
  CHECK_THROWS_AS(ncc_at_lag(x, x, 7), ValueError);   // overlap would be 1
  CHECK_THROWS_AS(ncc_at_lag(x, x, -1), ValueError);
  std::vector<double> flat(8, 2.0);
  CHECK(ncc_at_lag(flat, x, 0) == 0.0);
}

TEST_CASE("mxcorr(x, x) = 1 with the maximum at zero lag") {
  auto x = random_window(12, 3, 5);
  CHECK(mxcorr(x, x, 12, 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sin vs cos at the same frequency over full periods: >= 0.99") {
  const int64_t w = 32;
  std::vector<double> s(w), c(w);
  for (int64_t t = 0; t < w; ++t) {
    s[static_cast<size_t>(t)] = std::sin(2.0 * M_PI * t / 16.0);  // two full periods
    c[static_cast<size_t>(t)] = std::cos(2.0 * M_PI * t / 16.0);
  }
  CHECK(mxcorr(s, c, w, 1) >= 0.99);
}

TEST_CASE("random windows match the per-lag brute-force oracle within 1e-12") {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    int64_t w = 8 + static_cast<int64_t>(seed % 13);
    int64_t c = 1 + static_cast<int64_t>(seed % 3);
    auto x = random_window(w, c, seed * 7 + 1);
    auto y = random_window(w, c, seed * 7 + 2);
    CHECK(std::abs(mxcorr(x, y, w, c) - mxcorr_oracle(x, y, w, c)) < 1e-12);
  }
}

TEST_CASE("white-noise calibration: Monte Carlo 99th percentile stays under 0.6") {
  // 1000 seeds of an independent pair at w=64; the similarity of unrelated
  // noise should sit near the max-of-correlated-noise level, far from 1.
  const int64_t w = 64;
  std::vector<double> values;
  values.reserve(1000);
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    auto x = random_window(w, 1, 90000 + seed * 2);
    auto y = random_window(w, 1, 90001 + seed * 2);
    values.push_back(std::abs(mxcorr(x, y, w, 1)));
  }
  std::sort(values.begin(), values.end());
  double p99 = values[static_cast<size_t>(989)];
  INFO("p99 = " << p99);
  CHECK(p99 < 0.6);
}

TEST_CASE("shift robustness: circular shifts of a periodic window score ~1") {
  const int64_t period = 25, w = 2 * period;
  std::vector<double> base(static_cast<size_t>(w));
  for (int64_t t = 0; t < w; ++t)
    base[static_cast<size_t>(t)] = std::sin(2.0 * M_PI * t / static_cast<double>(period));
  for (int64_t shift = 0; shift < period; ++shift) {
    std::vector<double> shifted(static_cast<size_t>(w));
    for (int64_t t = 0; t < w; ++t) shifted[static_cast<size_t>(t)] = base[static_cast<size_t>((t + shift) % w)];
    CHECK(mxcorr(base, shifted, w, 1) >= 0.99);
  }
}

TEST_CASE("scale invariance: a*x + b leaves mxcorr exactly unchanged") {
  // Integer-valued windows at a power-of-two length make the transform
  // bit-exact; the general case is checked at 1e-12.
  Rng rng(17);
  const int64_t w = 16;
  std::vector<double> x(w), y(w), ax(w);
  for (int64_t t = 0; t < w; ++t) {
    x[static_cast<size_t>(t)] = static_cast<double>(rng.uniform_int(20));
    y[static_cast<size_t>(t)] = static_cast<double>(rng.uniform_int(20));
    ax[static_cast<size_t>(t)] = 2.0 * x[static_cast<size_t>(t)] + 3.0;
  }
  CHECK(mxcorr(ax, y, w, 1) == mxcorr(x, y, w, 1));

  auto xr = random_window(31, 2, 23);
  auto yr = random_window(31, 2, 24);
  std::vector<double> axr(xr.size());
  for (size_t i = 0; i < xr.size(); ++i) axr[i] = 0.37 * xr[i] - 11.0;
  CHECK(std::abs(mxcorr(axr, yr, 31, 2) - mxcorr(xr, yr, 31, 2)) < 1e-12);
}

TEST_CASE("mxcorr is symmetric (circular lags cover both directions)") {
  auto x = random_window(14, 2, 31);
  auto y = random_window(14, 2, 32);
  CHECK(mxcorr(x, y, 14, 2) == doctest::Approx(mxcorr(y, x, 14, 2)).epsilon(1e-12));
}

TEST_CASE("mxcorr_local: identical windows give all-ones off-diagonal") {
  auto x = random_window(10, 2, 40);
  std::vector<double> batch;
  for (int i = 0; i < 3; ++i) batch.insert(batch.end(), x.begin(), x.end());
  SimilarityMatrix sm = mxcorr_local(batch, 3, 10, 2);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 3; ++j)
      if (i != j) CHECK(sm.at(i, j) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("batched local equals pairwise bit-for-bit, any thread count") {
  const int64_t b = 5, w = 12, c = 2;
  std::vector<double> batch;
  for (int64_t i = 0; i < b; ++i) {
    auto x = random_window(w, c, 50 + static_cast<uint64_t>(i));
    batch.insert(batch.end(), x.begin(), x.end());
  }
  SimilarityMatrix sm1 = mxcorr_local(batch, b, w, c, 1);
  SimilarityMatrix sm2 = mxcorr_local(batch, b, w, c, 3);
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < b; ++j) {
      CHECK(sm1.at(i, j) == sm2.at(i, j));
      if (i == j) continue;
      std::span<const double> xi(batch.data() + i * w * c, static_cast<size_t>(w * c));
      std::span<const double> xj(batch.data() + j * w * c, static_cast<size_t>(w * c));
      CHECK(sm1.at(i, j) == mxcorr(xi, xj, w, c));
      CHECK(sm1.at(i, j) <= 1.0 + 1e-9);
    }
  CHECK_THROWS_AS(mxcorr_local(std::span<const double>(batch.data(), static_cast<size_t>(w * c)),
                               1, w, c, 1),
                  ValueError);
}

TEST_CASE("mxcorr_global on a strictly periodic series: all entries >= 0.99") {
  const int64_t l = 100, period = 25;
  std::vector<double> s(static_cast<size_t>(l));
  for (int64_t t = 0; t < l; ++t) s[static_cast<size_t>(t)] = std::sin(2.0 * M_PI * t / static_cast<double>(period));
  PatchView view = segment(s, l, 1, static_cast<int>(period));
  SimilarityMatrix sm = mxcorr_global(view);
  REQUIRE(sm.extent == 4);
  for (int64_t m = 0; m < 4; ++m)
    for (int64_t n = 0; n < 4; ++n)
      if (m != n) CHECK(sm.at(m, n) >= 0.99);
}

TEST_CASE("mxcorr_global: M=2 shape, random case matches the pairwise oracle") {
  auto s = random_window(40, 2, 61);
  PatchView view = segment(s, 40, 2, 20);
  SimilarityMatrix sm = mxcorr_global(view);
  CHECK(sm.extent == 2);
  CHECK(std::abs(sm.at(0, 1) -
                 mxcorr_oracle({s.begin(), s.begin() + 40}, {s.begin() + 40, s.end()}, 20, 2)) <
        1e-12);

  // fewer than 2 usable windows is an error
  auto tiny = random_window(10, 1, 62);
  PatchView v2 = segment(tiny, 10, 1, 16);
  CHECK(v2.usable_count() == 1);
  CHECK_THROWS_AS(mxcorr_global(v2), ValueError);
}

TEST_CASE("dtw: identity is 0, warped match is 0, single cell is |x-y|") {
  std::vector<double> a{1, 2, 3};
  CHECK(dtw_distance(a, 3, a, 3, 1) == 0.0);
  std::vector<double> b{1, 2, 2, 3};
  CHECK(dtw_distance(a, 3, b, 4, 1) == 0.0);
  std::vector<double> x0{0}, y5{5};
  CHECK(dtw_distance(x0, 1, y5, 1, 1) == 5.0);
  CHECK_THROWS_AS(dtw_distance(a, 0, b, 4, 1), ValueError);
}

TEST_CASE("dtw matches exhaustive path enumeration on small grids") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto x = random_window(3, 1, 70 + seed);
    auto y = random_window(4, 1, 80 + seed);
    double expect = dtw_enum(x, y, 2, 3);
    CHECK(dtw_distance(x, 3, y, 4, 1) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("dtw symmetry under the L1 cost") {
  auto x = random_window(9, 3, 91);
  auto y = random_window(13, 3, 92);
  CHECK(dtw_distance(x, 9, y, 13, 3) == doctest::Approx(dtw_distance(y, 13, x, 9, 3)).epsilon(1e-12));
}

}  // TEST_SUITE
