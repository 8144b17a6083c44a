#include "plants/patching.hpp"

#include <algorithm>

#include "plants/errors.hpp"

namespace plants {

PatchView segment(std::span<const double> series, int64_t length, int64_t channels, int window) {
  if (window <= 0) throw ValueError("segment: window must be positive");
  if (length < 1 || channels < 1) throw ValueError("segment: empty series");
  if (static_cast<int64_t>(series.size()) != length * channels)
    throw ValueError("segment: series size does not match L*C");

  PatchView view;
  view.window = window;
  view.length = length;
  view.channels = channels;
  view.count = (length + window - 1) / window;
  view.pad_len = view.count * window - length;
  view.padded.assign(static_cast<size_t>(view.count * window * channels), 0.0);
  std::copy(series.begin(), series.end(), view.padded.begin());
  view.usable.resize(static_cast<size_t>(view.count));
  for (int64_t m = 0; m < view.count; ++m) {
    int64_t pad_in_window = window - view.valid_len(m);
    view.usable[static_cast<size_t>(m)] = (2 * pad_in_window <= window) ? 1 : 0;
  }
  return view;
}

std::vector<double> unsegment(const PatchView& view) {
  return {view.padded.begin(), view.padded.begin() + view.length * view.channels};
}

std::vector<PatchView> multi_segment(std::span<const double> series, int64_t length,
                                     int64_t channels, const PeriodSet& periods) {
  if (periods.empty()) throw ValueError("multi_segment: empty period set");
  std::vector<PatchView> views;
  views.reserve(periods.size());
  for (const auto& entry : periods.entries)
    views.push_back(segment(series, length, channels, entry.window));
  return views;
}

}  // namespace plants
