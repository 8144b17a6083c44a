#include <doctest.h>

#include <cmath>
#include <complex>

#include "plants/periodicity.hpp"
#include "plants/rng.hpp"

using namespace plants;

namespace {

// Independent oracle: direct DFT summation, no FFT machinery shared with the
// implementation.
std::vector<double> dft_amplitude_oracle(const TimeSeriesDataset& ds) {
  const int64_t half = ds.l / 2;
  std::vector<double> amps(static_cast<size_t>(half + 1), 0.0);
  for (int64_t i = 0; i < ds.n; ++i)
    for (int64_t ch = 0; ch < ds.c; ++ch)
      for (int64_t f = 0; f <= half; ++f) {
        std::complex<double> acc(0.0, 0.0);
        for (int64_t t = 0; t < ds.l; ++t) {
          double angle = -2.0 * M_PI * static_cast<double>(f * t) / static_cast<double>(ds.l);
          acc += ds.at(i, t, ch) * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        amps[static_cast<size_t>(f)] += std::abs(acc);
      }
  for (auto& a : amps) a /= static_cast<double>(ds.n * ds.c);
  return amps;
}

TimeSeriesDataset single_tone(int64_t l, int freq, double amp = 1.0) {
  TimeSeriesDataset ds;
  ds.n = 1;
  ds.l = l;
  ds.c = 1;
  ds.values.resize(static_cast<size_t>(l));
  for (int64_t t = 0; t < l; ++t)
    ds.at(0, t, 0) = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(t) / static_cast<double>(l));
  return ds;
}

}  // namespace

TEST_SUITE("periodicity") {

TEST_CASE("single tone at f=4, L=100: argmax over non-DC bins is 4") {
  TimeSeriesDataset ds = single_tone(100, 4);
  Spectrum spec = amplitude_spectrum(ds);
  auto oracle = dft_amplitude_oracle(ds);
  REQUIRE(spec.amplitudes.size() == oracle.size());
  for (size_t f = 0; f < oracle.size(); ++f)
    CHECK(spec.amplitudes[f] == doctest::Approx(oracle[f]).epsilon(1e-9));
  size_t argmax = 1;
  for (size_t f = 1; f < spec.amplitudes.size(); ++f)
    if (spec.amplitudes[f] > spec.amplitudes[argmax]) argmax = f;
  CHECK(argmax == 4);
}

TEST_CASE("constant series: all non-DC amplitudes below 1e-9") {
  TimeSeriesDataset ds;
  ds.n = 2;
  ds.l = 64;
  ds.c = 2;
  ds.values.assign(static_cast<size_t>(ds.n * ds.l * ds.c), 3.25);
  Spectrum spec = amplitude_spectrum(ds);
  for (size_t f = 1; f < spec.amplitudes.size(); ++f) CHECK(spec.amplitudes[f] < 1e-9);
}

TEST_CASE("two tones: F[4] > F[10] > every other bin, matching the DFT oracle") {
  TimeSeriesDataset ds;
  ds.n = 1;
  ds.l = 100;
  ds.c = 1;
  ds.values.resize(100);
  for (int64_t t = 0; t < 100; ++t)
    ds.at(0, t, 0) = 2.0 * std::sin(2.0 * M_PI * 4.0 * t / 100.0) +
                     1.0 * std::sin(2.0 * M_PI * 10.0 * t / 100.0);
  Spectrum spec = amplitude_spectrum(ds);
  auto oracle = dft_amplitude_oracle(ds);
  for (size_t f = 0; f < oracle.size(); ++f)
    CHECK(spec.amplitudes[f] == doctest::Approx(oracle[f]).epsilon(1e-9));
  for (size_t f = 1; f < spec.amplitudes.size(); ++f) {
    if (f == 4 || f == 10) continue;
    CHECK(spec.amplitudes[4] > spec.amplitudes[10]);
    CHECK(spec.amplitudes[10] > spec.amplitudes[f]);
  }

  SUBCASE("top_k_periods maps the tones to windows {25, 10}") {
    PeriodSet ps = top_k_periods(spec, 2);
    REQUIRE(ps.size() == 2);
    CHECK(ps.entries[0].window == 25);  // ceil(100/4), sorted descending
    CHECK(ps.entries[0].frequency == 4);
    CHECK(ps.entries[1].window == 10);  // ceil(100/10)
    CHECK(ps.entries[1].frequency == 10);
  }
}

TEST_CASE("dominant f=4 at L=100 gives w=25") {
  PeriodSet ps = top_k_periods(amplitude_spectrum(single_tone(100, 4)), 1);
  REQUIRE(ps.size() == 1);
  CHECK(ps.entries[0].window == 25);
}

TEST_CASE("constant series triggers the fallback with suggested window L/4") {
  TimeSeriesDataset ds;
  ds.n = 1;
  ds.l = 100;
  ds.c = 1;
  ds.values.assign(100, -7.0);
  Spectrum spec = amplitude_spectrum(ds);
  try {
    top_k_periods(spec, 3);
    FAIL("expected PeriodFallbackError");
  } catch (const PeriodFallbackError& e) {
    CHECK(e.suggested_window == 25);
  }
}

TEST_CASE("L < 9 errors toward fixed-window mode") {
  TimeSeriesDataset ds;
  ds.n = 1;
  ds.l = 8;
  ds.c = 1;
  ds.values.assign(8, 0.0);
  try {
    amplitude_spectrum(ds);
    FAIL("expected ValueError");
  } catch (const ValueError& e) {
    CHECK(std::string(e.what()).find("fixed-window") != std::string::npos);
  }
}

TEST_CASE("non-finite input is rejected") {
  TimeSeriesDataset ds = single_tone(32, 3);
  ds.at(0, 5, 0) = std::nan("");
  CHECK_THROWS_AS(amplitude_spectrum(ds), DataError);
}

TEST_CASE("restriction band honored on random inputs") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    TimeSeriesDataset ds;
    ds.n = 2;
    ds.l = 50 + static_cast<int64_t>(seed) * 13;
    ds.c = 2;
    ds.values.resize(static_cast<size_t>(ds.n * ds.l * ds.c));
    for (auto& v : ds.values) v = rng.normal();
    PeriodSet ps = top_k_periods(amplitude_spectrum(ds), 5);
    for (const auto& e : ps.entries) {
      CHECK(e.frequency >= 1);
      CHECK(e.frequency <= ds.l / 3);
      CHECK(e.window >= 3);
      CHECK(e.window <= ds.l);
    }
    // windows sorted descending and unique
    for (size_t i = 1; i < ps.entries.size(); ++i)
      CHECK(ps.entries[i - 1].window > ps.entries[i].window);
  }
}

TEST_CASE("spectrum invariant to instance and channel ordering") {
  Rng rng(42);
  TimeSeriesDataset ds;
  ds.n = 3;
  ds.l = 40;
  ds.c = 2;
  ds.values.resize(static_cast<size_t>(ds.n * ds.l * ds.c));
  for (auto& v : ds.values) v = rng.normal();

  TimeSeriesDataset shuffled = ds;
  for (int64_t t = 0; t < ds.l; ++t) {
    // swap instances 0<->2 and channels 0<->1
    for (int64_t ch = 0; ch < 2; ++ch) {
      std::swap(shuffled.at(0, t, ch), shuffled.at(2, t, ch));
    }
    for (int64_t i = 0; i < 3; ++i) std::swap(shuffled.at(i, t, 0), shuffled.at(i, t, 1));
  }
  Spectrum a = amplitude_spectrum(ds);
  Spectrum b = amplitude_spectrum(shuffled);
  for (size_t f = 0; f < a.amplitudes.size(); ++f)
    CHECK(a.amplitudes[f] == doctest::Approx(b.amplitudes[f]).epsilon(1e-12));
}

TEST_CASE("planted-period recovery at 10 dB, 20 seeds") {
  // The 100-seed version is acceptance criterion 4; this is the quick check.
  const int64_t l = 100;
  int successes = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    int freq = 2 + static_cast<int>(rng.uniform_int(19));  // [2, 20] = [2, L/5]
    double sigma = 1.0 / std::sqrt(20.0);                  // SNR = 10 dB for amplitude 1
    TimeSeriesDataset ds;
    ds.n = 1;
    ds.l = l;
    ds.c = 1;
    ds.values.resize(static_cast<size_t>(l));
    for (int64_t t = 0; t < l; ++t)
      ds.at(0, t, 0) = std::sin(2.0 * M_PI * freq * t / static_cast<double>(l)) +
                       rng.normal(0.0, sigma);
    PeriodSet ps = top_k_periods(amplitude_spectrum(ds), 3);
    int wanted = static_cast<int>((l + freq - 1) / freq);
    for (const auto& e : ps.entries)
      if (e.window == wanted) {
        ++successes;
        break;
      }
  }
  CHECK(successes >= 19);
}

TEST_CASE("periods_from_windows validates and sorts") {
  PeriodSet ps = periods_from_windows({10, 25, 10}, 100);
  REQUIRE(ps.size() == 2);
  CHECK(ps.entries[0].window == 25);
  CHECK(ps.entries[1].window == 10);
  CHECK_THROWS_AS(periods_from_windows({2}, 100), ValueError);
  CHECK_THROWS_AS(periods_from_windows({101}, 100), ValueError);
  CHECK_THROWS_AS(periods_from_windows({}, 100), ValueError);
}

}  // TEST_SUITE
