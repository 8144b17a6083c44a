#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "plants/periodicity.hpp"

namespace plants {

// Non-overlapping segmentation of an L x C series at window length w, with
// trailing zero padding so that M * w == L + pad_len. Windows whose padding
// exceeds 50% are flagged unusable and excluded from every loss.
struct PatchView {
  int window = 0;        // w
  int64_t count = 0;     // M = ceil(L / w)
  int64_t length = 0;    // original L
  int64_t channels = 0;  // C
  int64_t pad_len = 0;   // appended zeros, in timesteps
  std::vector<double> padded;  // (M*w) x C, row-major
  std::vector<char> usable;    // per window: <= 50% padding

  std::span<const double> patch(int64_t m) const {
    return {padded.data() + m * window * channels, static_cast<size_t>(window * channels)};
  }
  // Timesteps of window m that hold real data (the remainder is padding).
  int64_t valid_len(int64_t m) const {
    int64_t start = m * window;
    int64_t v = length - start;
    return v >= window ? window : v;
  }
  int64_t start(int64_t m) const { return m * window; }
  int64_t usable_count() const {
    int64_t k = 0;
    for (char u : usable) k += u;
    return k;
  }
};

PatchView segment(std::span<const double> series, int64_t length, int64_t channels, int window);

// Un-pads and re-concatenates; exact inverse of segment.
std::vector<double> unsegment(const PatchView& view);

std::vector<PatchView> multi_segment(std::span<const double> series, int64_t length,
                                     int64_t channels, const PeriodSet& periods);

}  // namespace plants
