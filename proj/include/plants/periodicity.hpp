#pragma once

#include <cstdint>
#include <vector>

#include "plants/dataset.hpp"

namespace plants {

// Channel- and instance-averaged amplitude spectrum of a dataset. Bin j holds
// |DFT| at frequency index j (j cycles over the series), j in [0, L/2].
struct Spectrum {
  std::vector<double> amplitudes;
  int64_t series_length = 0;
};

struct PeriodEntry {
  int frequency = 0;    // integer frequency index f_j
  double amplitude = 0.0;
  int window = 0;       // w_j = ceil(L / f_j)
};

// Dominant periodicities, one entry per retained window size. Windows are
// sorted descending and deduplicated (the strongest frequency wins a window).
struct PeriodSet {
  std::vector<PeriodEntry> entries;
  int64_t series_length = 0;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }
  std::vector<int> windows() const {
    std::vector<int> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.window);
    return out;
  }
};

// Mean over instances and channels of the magnitude DFT along time.
// Requires L >= 9 so the search band [1, L/3] is non-degenerate; non-finite
// input is rejected. Averaging spans both channels and instances; a
// per-channel variant would be the main alternative reading.
Spectrum amplitude_spectrum(const TimeSeriesDataset& dataset);

// Top-k frequency indices within [1, floor(L/3)], each mapped to
// w = ceil(L/f). DC is excluded, frequencies below the noise floor
// (1e-3 x the max non-DC amplitude) are ineligible, amplitude ties break
// toward the lower frequency, and windows shorter than 3 samples are
// dropped. Fewer than k entries may come back. If nothing qualifies
// (constant input), throws PeriodFallbackError suggesting round(L/4).
PeriodSet top_k_periods(const Spectrum& spectrum, int k);

// Convenience: spectrum + top-k in one call.
PeriodSet detect_periods(const TimeSeriesDataset& dataset, int k);

// Builds a PeriodSet from user-supplied window sizes (fixed-window mode).
PeriodSet periods_from_windows(const std::vector<int>& windows, int64_t series_length);

}  // namespace plants
