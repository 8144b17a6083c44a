#include "plants/periodicity.hpp"

#include <algorithm>
#include <cmath>

#include "plants/fft.hpp"

namespace plants {

Spectrum amplitude_spectrum(const TimeSeriesDataset& dataset) {
  dataset.validate();
  if (dataset.l < 9)
    throw ValueError("amplitude_spectrum: L=" + std::to_string(dataset.l) +
                     " is too short for the [1, L/3] band; pass explicit windows "
                     "(fixed-window mode) instead");
  if (dataset.n < 1) throw ValueError("amplitude_spectrum: empty dataset");
  if (!dataset.finite()) throw DataError("amplitude_spectrum: non-finite input values");

  const int64_t half = dataset.l / 2;
  Spectrum spec;
  spec.series_length = dataset.l;
  spec.amplitudes.assign(static_cast<size_t>(half + 1), 0.0);

  std::vector<double> channel(static_cast<size_t>(dataset.l));
  for (int64_t i = 0; i < dataset.n; ++i) {
    for (int64_t ch = 0; ch < dataset.c; ++ch) {
      for (int64_t t = 0; t < dataset.l; ++t) channel[static_cast<size_t>(t)] = dataset.at(i, t, ch);
      auto bins = dft_real(channel);
      for (int64_t f = 0; f <= half; ++f)
        spec.amplitudes[static_cast<size_t>(f)] += std::abs(bins[static_cast<size_t>(f)]);
    }
  }
  double inv = 1.0 / static_cast<double>(dataset.n * dataset.c);
  for (auto& a : spec.amplitudes) a *= inv;
  return spec;
}

PeriodSet top_k_periods(const Spectrum& spectrum, int k) {
  if (k < 1) throw ValueError("top_k_periods: K must be >= 1");
  const int64_t len = spectrum.series_length;
  if (len < 9 || spectrum.amplitudes.size() < 4)
    throw ValueError("top_k_periods: spectrum too short");
  const int fallback = static_cast<int>(std::llround(static_cast<double>(len) / 4.0));

  const int band_hi = static_cast<int>(len / 3);  // paper band [1, L/3]
  double max_non_dc = 0.0;
  for (size_t f = 1; f < spectrum.amplitudes.size(); ++f)
    max_non_dc = std::max(max_non_dc, spectrum.amplitudes[f]);

  // Constant-like input: no periodic energy anywhere above numerical noise.
  if (max_non_dc <= 1e-9 * std::max(1.0, spectrum.amplitudes[0]))
    throw PeriodFallbackError(
        "top_k_periods: no periodic structure found (constant input?); "
        "suggested fixed window " + std::to_string(fallback),
        fallback);

  const double noise_floor = 1e-3 * max_non_dc;
  std::vector<int> candidates;
  for (int f = 1; f <= band_hi; ++f)
    if (spectrum.amplitudes[static_cast<size_t>(f)] >= noise_floor) candidates.push_back(f);

  // Amplitude descending; ties toward the lower frequency (longer window).
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    double fa = spectrum.amplitudes[static_cast<size_t>(a)];
    double fb = spectrum.amplitudes[static_cast<size_t>(b)];
    if (fa != fb) return fa > fb;
    return a < b;
  });

  PeriodSet ps;
  ps.series_length = len;
  for (int f : candidates) {
    if (static_cast<int>(ps.entries.size()) >= k) break;
    int w = static_cast<int>((len + f - 1) / f);  // ceil(L/f)
    if (w < 3) continue;
    bool dup = false;
    for (const auto& e : ps.entries) dup = dup || (e.window == w);
    if (dup) continue;
    ps.entries.push_back({f, spectrum.amplitudes[static_cast<size_t>(f)], w});
  }
  if (ps.entries.empty())
    throw PeriodFallbackError(
        "top_k_periods: no eligible frequency in [1, L/3]; suggested fixed window " +
            std::to_string(fallback),
        fallback);
  std::sort(ps.entries.begin(), ps.entries.end(),
            [](const PeriodEntry& a, const PeriodEntry& b) { return a.window > b.window; });
  return ps;
}

PeriodSet detect_periods(const TimeSeriesDataset& dataset, int k) {
  return top_k_periods(amplitude_spectrum(dataset), k);
}

PeriodSet periods_from_windows(const std::vector<int>& windows, int64_t series_length) {
  if (windows.empty()) throw ValueError("periods_from_windows: empty window list");
  PeriodSet ps;
  ps.series_length = series_length;
  for (int w : windows) {
    if (w < 3 || w > series_length)
      throw ValueError("periods_from_windows: window " + std::to_string(w) +
                       " outside [3, L=" + std::to_string(series_length) + "]");
    bool dup = false;
    for (const auto& e : ps.entries) dup = dup || (e.window == w);
    if (!dup) ps.entries.push_back({0, 0.0, w});
  }
  std::sort(ps.entries.begin(), ps.entries.end(),
            [](const PeriodEntry& a, const PeriodEntry& b) { return a.window > b.window; });
  return ps;
}

}  // namespace plants
