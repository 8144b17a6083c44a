#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "plants/patching.hpp"

namespace plants {

// Pairwise MXCorr scores. kind Local: batch x batch at one window index
// (s^m_ij); kind Global: windows x windows of one instance (a^i_mn). The
// diagonal is excluded from every consumer and stored as 0.
struct SimilarityMatrix {
  enum class Kind { Local, Global };
  Kind kind = Kind::Local;
  int64_t extent = 0;
  std::vector<double> values;        // extent x extent, row-major
  std::vector<char> usable;          // per index; all-1 for Local

  double at(int64_t i, int64_t j) const { return values[static_cast<size_t>(i * extent + j)]; }
  double& at(int64_t i, int64_t j) { return values[static_cast<size_t>(i * extent + j)]; }
  int64_t usable_count() const {
    int64_t k = 0;
    for (char u : usable) k += u;
    return k;
  }
};

// Pearson correlation between x[tau..w) and y[0..w-tau) computed on the
// overlap (overlap means and norms). Zero variance on either side returns 0.
// tau must satisfy 0 <= tau <= w-2 so the overlap has at least 2 points.
double ncc_at_lag(std::span<const double> x, std::span<const double> y, int64_t tau);

// Maximum cross-correlation of two w x C windows: per channel, the maximum
// over circular lags tau in [0, w-1] of the correlation between the
// zero-mean, unit-norm channel and its circularly shifted counterpart,
// averaged over channels. Constant channels contribute 0. Result in [-1, 1]
// and symmetric in its arguments.
double mxcorr(std::span<const double> x, std::span<const double> y, int64_t w, int64_t channels);

// Batch version: entry (i,j) = mxcorr of windows i and j taken from
// batch[i*w*C ...]. Requires B >= 2. `threads` splits rows; results are
// identical for any thread count.
SimilarityMatrix mxcorr_local(std::span<const double> batch_windows, int64_t batch, int64_t w,
                              int64_t channels, int threads = 1);

// Window-vs-window matrix for one instance's PatchView. Unusable (padding
// heavy) windows are excluded; fewer than 2 usable windows is an error.
SimilarityMatrix mxcorr_global(const PatchView& view, int threads = 1);

// Classic DTW with per-step L1 cost between channel vectors, no window
// constraint; returns the accumulated cost.
double dtw_distance(std::span<const double> x, int64_t lx, std::span<const double> y, int64_t ly,
                    int64_t channels);

}  // namespace plants
