#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plants/errors.hpp"

namespace plants {

// N instances of an L x C multivariate series, row-major (instance, step,
// channel), with optional per-timestep or per-instance integer labels.
// Representation files reuse the same container with c = embedding width and
// an optional n x c instance-level block (max-pooled over time).
struct TimeSeriesDataset {
  int64_t n = 0, l = 0, c = 0;
  std::vector<double> values;
  std::vector<int32_t> step_labels;      // n*l when present
  std::vector<int32_t> instance_labels;  // n when present
  std::vector<double> instance_block;    // n*c when present

  double& at(int64_t i, int64_t t, int64_t ch) {
    return values[static_cast<size_t>((i * l + t) * c + ch)];
  }
  double at(int64_t i, int64_t t, int64_t ch) const {
    return values[static_cast<size_t>((i * l + t) * c + ch)];
  }
  std::span<const double> series(int64_t i) const {
    return {values.data() + i * l * c, static_cast<size_t>(l * c)};
  }
  std::span<double> series_mut(int64_t i) {
    return {values.data() + i * l * c, static_cast<size_t>(l * c)};
  }
  bool has_step_labels() const { return !step_labels.empty(); }
  bool has_instance_labels() const { return !instance_labels.empty(); }
  bool finite() const;
  void validate() const;  // extents vs payload sizes
};

enum class DataFormat { Csv, Binary };

// CSV layout: header "instance,timestep,c0,...,c{C-1}[,label]" then one row
// per (instance, timestep). Binary layout ("PLTSDATA"): see dataset.cpp.
TimeSeriesDataset load_dataset(const std::string& path, DataFormat format);
TimeSeriesDataset load_dataset(const std::string& path);  // sniffs the magic
void save_dataset(const TimeSeriesDataset& ds, const std::string& path, DataFormat format);

}  // namespace plants
