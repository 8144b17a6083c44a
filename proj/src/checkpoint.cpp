#include "plants/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace plants {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'A', 'N', 'T', 'S', '0', '1'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

void write_array(std::ostream& os, const Shape& shape, std::span<const double> data) {
  write_pod<uint32_t>(os, static_cast<uint32_t>(shape.size()));
  for (int64_t d : shape) write_pod<uint64_t>(os, static_cast<uint64_t>(d));
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<int64_t>(data.size()) * 8);
}

std::vector<double> read_array(std::istream& is, const Shape& expected, const char* what) {
  uint32_t ndim = read_pod<uint32_t>(is, what);
  if (ndim != expected.size())
    throw DataError(std::string("checkpoint: rank mismatch for ") + what);
  int64_t count = 1;
  for (uint32_t d = 0; d < ndim; ++d) {
    int64_t extent = static_cast<int64_t>(read_pod<uint64_t>(is, what));
    if (extent != expected[d])
      throw DataError(std::string("checkpoint: shape mismatch for ") + what);
    count *= extent;
  }
  std::vector<double> data(static_cast<size_t>(count));
  is.read(reinterpret_cast<char*>(data.data()), count * 8);
  if (!is) throw DataError(std::string("checkpoint: truncated payload for ") + what);
  return data;
}

}  // namespace

void save_checkpoint(const std::string& path, const PlantsModel& model,
                     const Standardizer& standardizer) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  const ModelConfig& cfg = model.config();
  os.write(kMagic, 8);
  write_pod<int32_t>(os, cfg.in_channels);
  write_pod<int32_t>(os, cfg.hidden);
  write_pod<int32_t>(os, cfg.depth);
  write_pod<int32_t>(os, cfg.kernel);
  write_pod<int32_t>(os, cfg.d_l);
  write_pod<int32_t>(os, cfg.d_t);
  write_pod<int32_t>(os, cfg.head_hidden);
  write_pod<uint64_t>(os, cfg.seed);

  auto params = model.parameters();
  write_pod<uint32_t>(os, static_cast<uint32_t>(2 + params.size()));
  Shape chan_shape{cfg.in_channels};
  if (static_cast<int64_t>(standardizer.mean.size()) != cfg.in_channels ||
      static_cast<int64_t>(standardizer.stddev.size()) != cfg.in_channels)
    throw ValueError("checkpoint: standardizer width does not match in_channels");
  write_array(os, chan_shape, standardizer.mean);
  write_array(os, chan_shape, standardizer.stddev);
  for (const auto& p : params) write_array(os, p.shape(), p.values());
  if (!os) throw DataError("failed while writing " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);

  ModelConfig cfg;
  cfg.in_channels = read_pod<int32_t>(is, "in_channels");
  cfg.hidden = read_pod<int32_t>(is, "hidden");
  cfg.depth = read_pod<int32_t>(is, "depth");
  cfg.kernel = read_pod<int32_t>(is, "kernel");
  cfg.d_l = read_pod<int32_t>(is, "d_l");
  cfg.d_t = read_pod<int32_t>(is, "d_t");
  cfg.head_hidden = read_pod<int32_t>(is, "head_hidden");
  cfg.seed = read_pod<uint64_t>(is, "seed");
  cfg.validate();

  LoadedCheckpoint out{PlantsModel(cfg), Standardizer{}};
  auto params = out.model.parameters();
  uint32_t n_arrays = read_pod<uint32_t>(is, "array count");
  if (n_arrays != 2 + params.size())
    throw DataError("checkpoint: expected " + std::to_string(2 + params.size()) +
                    " arrays, found " + std::to_string(n_arrays));
  Shape chan_shape{cfg.in_channels};
  out.standardizer.mean = read_array(is, chan_shape, "standardizer mean");
  out.standardizer.stddev = read_array(is, chan_shape, "standardizer std");
  for (auto& p : params) {
    auto data = read_array(is, p.shape(), "parameter");
    std::copy(data.begin(), data.end(), p.raw_values().begin());
  }
  return out;
}

}  // namespace plants
