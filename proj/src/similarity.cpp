#include "plants/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "plants/errors.hpp"

namespace plants {

double ncc_at_lag(std::span<const double> x, std::span<const double> y, int64_t tau) {
  const int64_t w = static_cast<int64_t>(x.size());
  if (static_cast<int64_t>(y.size()) != w) throw ValueError("ncc_at_lag: length mismatch");
  if (tau < 0 || tau > w - 2)
    throw ValueError("ncc_at_lag: lag " + std::to_string(tau) + " outside [0, w-2]");
  const int64_t overlap = w - tau;
  double mx = 0.0, my = 0.0;
  for (int64_t t = 0; t < overlap; ++t) {
    mx += x[static_cast<size_t>(tau + t)];
    my += y[static_cast<size_t>(t)];
  }
  mx /= static_cast<double>(overlap);
  my /= static_cast<double>(overlap);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int64_t t = 0; t < overlap; ++t) {
    double a = x[static_cast<size_t>(tau + t)] - mx;
    double b = y[static_cast<size_t>(t)] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

// Channel extracted from a window, centered and scaled to unit norm.
// zero_variance marks constant channels (they contribute 0 to MXCorr).
struct NormalizedChannel {
  std::vector<double> v;
  bool zero_variance = false;
};

NormalizedChannel normalize_channel(std::span<const double> window, int64_t w, int64_t channels,
                                    int64_t ch) {
  NormalizedChannel out;
  out.v.resize(static_cast<size_t>(w));
  double mean = 0.0;
  for (int64_t t = 0; t < w; ++t) mean += window[static_cast<size_t>(t * channels + ch)];
  mean /= static_cast<double>(w);
  double norm = 0.0;
  for (int64_t t = 0; t < w; ++t) {
    double d = window[static_cast<size_t>(t * channels + ch)] - mean;
    out.v[static_cast<size_t>(t)] = d;
    norm += d * d;
  }
  if (norm == 0.0) {
    out.zero_variance = true;
    return out;
  }
  double inv = 1.0 / std::sqrt(norm);
  for (auto& d : out.v) d *= inv;
  return out;
}

// max over circular lags of the dot product of two unit-norm channels.
double max_circular_cc(const std::vector<double>& a, const std::vector<double>& b) {
  const int64_t w = static_cast<int64_t>(a.size());
  double best = -2.0;
  for (int64_t tau = 0; tau < w; ++tau) {
    double acc = 0.0;
    for (int64_t t = 0; t < w; ++t) {
      int64_t shifted = t + tau;
      if (shifted >= w) shifted -= w;
      acc += a[static_cast<size_t>(shifted)] * b[static_cast<size_t>(t)];
    }
    best = std::max(best, acc);
  }
  return best;
}

std::vector<NormalizedChannel> normalize_window(std::span<const double> window, int64_t w,
                                                int64_t channels) {
  std::vector<NormalizedChannel> out;
  out.reserve(static_cast<size_t>(channels));
  for (int64_t ch = 0; ch < channels; ++ch) out.push_back(normalize_channel(window, w, channels, ch));
  return out;
}

double mxcorr_normalized(const std::vector<NormalizedChannel>& x,
                         const std::vector<NormalizedChannel>& y) {
  double acc = 0.0;
  for (size_t ch = 0; ch < x.size(); ++ch) {
    if (x[ch].zero_variance || y[ch].zero_variance) continue;  // contributes 0
    acc += max_circular_cc(x[ch].v, y[ch].v);
  }
  return acc / static_cast<double>(x.size());
}

void parallel_rows(int64_t rows, int threads, const std::function<void(int64_t)>& body) {
  if (threads <= 1) {
    for (int64_t i = 0; i < rows; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  int64_t chunk = (rows + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int64_t lo = t * chunk, hi = std::min(rows, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int64_t i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

double mxcorr(std::span<const double> x, std::span<const double> y, int64_t w, int64_t channels) {
  if (w < 3) throw ValueError("mxcorr: window must be >= 3");
  if (static_cast<int64_t>(x.size()) != w * channels ||
      static_cast<int64_t>(y.size()) != w * channels)
    throw ShapeError("mxcorr", {static_cast<int64_t>(x.size())}, {static_cast<int64_t>(y.size())});
  return mxcorr_normalized(normalize_window(x, w, channels), normalize_window(y, w, channels));
}

SimilarityMatrix mxcorr_local(std::span<const double> batch_windows, int64_t batch, int64_t w,
                              int64_t channels, int threads) {
  if (batch < 2) throw ValueError("mxcorr_local: batch must have B >= 2");
  if (static_cast<int64_t>(batch_windows.size()) != batch * w * channels)
    throw ValueError("mxcorr_local: buffer size does not match B*w*C");

  std::vector<std::vector<NormalizedChannel>> prepped;
  prepped.reserve(static_cast<size_t>(batch));
  for (int64_t i = 0; i < batch; ++i)
    prepped.push_back(
        normalize_window(batch_windows.subspan(static_cast<size_t>(i * w * channels),
                                               static_cast<size_t>(w * channels)),
                         w, channels));

  SimilarityMatrix sm;
  sm.kind = SimilarityMatrix::Kind::Local;
  sm.extent = batch;
  sm.values.assign(static_cast<size_t>(batch * batch), 0.0);
  sm.usable.assign(static_cast<size_t>(batch), 1);
  // Each ordered pair goes through the same evaluation path as a standalone
  // mxcorr call, so batched output is bit-identical to pairwise calls.
  // Disjoint row writes keep the result independent of scheduling.
  parallel_rows(batch, threads, [&](int64_t i) {
    for (int64_t j = 0; j < batch; ++j)
      if (j != i)
        sm.at(i, j) = mxcorr_normalized(prepped[static_cast<size_t>(i)], prepped[static_cast<size_t>(j)]);
  });
  return sm;
}

SimilarityMatrix mxcorr_global(const PatchView& view, int threads) {
  if (view.window < 3) throw ValueError("mxcorr_global: window must be >= 3");
  if (view.usable_count() < 2)
    throw ValueError("mxcorr_global: fewer than 2 usable windows at w=" +
                     std::to_string(view.window));

  std::vector<std::vector<NormalizedChannel>> prepped(static_cast<size_t>(view.count));
  for (int64_t m = 0; m < view.count; ++m)
    if (view.usable[static_cast<size_t>(m)])
      prepped[static_cast<size_t>(m)] = normalize_window(view.patch(m), view.window, view.channels);

  SimilarityMatrix sm;
  sm.kind = SimilarityMatrix::Kind::Global;
  sm.extent = view.count;
  sm.values.assign(static_cast<size_t>(view.count * view.count), 0.0);
  sm.usable.assign(view.usable.begin(), view.usable.end());
  parallel_rows(view.count, threads, [&](int64_t m) {
    if (!sm.usable[static_cast<size_t>(m)]) return;
    for (int64_t n = 0; n < view.count; ++n)
      if (n != m && sm.usable[static_cast<size_t>(n)])
        sm.at(m, n) = mxcorr_normalized(prepped[static_cast<size_t>(m)], prepped[static_cast<size_t>(n)]);
  });
  return sm;
}

double dtw_distance(std::span<const double> x, int64_t lx, std::span<const double> y, int64_t ly,
                    int64_t channels) {
  if (lx < 1 || ly < 1) throw ValueError("dtw_distance: empty input");
  if (static_cast<int64_t>(x.size()) != lx * channels ||
      static_cast<int64_t>(y.size()) != ly * channels)
    throw ValueError("dtw_distance: buffer size does not match length*channels");

  const double inf = HUGE_VAL;
  std::vector<double> prev(static_cast<size_t>(ly + 1), inf), cur(static_cast<size_t>(ly + 1), inf);
  prev[0] = 0.0;
  for (int64_t i = 1; i <= lx; ++i) {
    cur[0] = inf;
    const double* xi = &x[static_cast<size_t>((i - 1) * channels)];
    for (int64_t j = 1; j <= ly; ++j) {
      const double* yj = &y[static_cast<size_t>((j - 1) * channels)];
      double cost = 0.0;
      for (int64_t ch = 0; ch < channels; ++ch) cost += std::abs(xi[ch] - yj[ch]);
      double best = std::min(prev[static_cast<size_t>(j)],
                             std::min(prev[static_cast<size_t>(j - 1)], cur[static_cast<size_t>(j - 1)]));
      cur[static_cast<size_t>(j)] = cost + best;
    }
    std::swap(prev, cur);
  }
  return prev[static_cast<size_t>(ly)];
}

}  // namespace plants
