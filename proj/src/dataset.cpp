#include "plants/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace plants {

namespace {

constexpr char kMagic[8] = {'P', 'L', 'T', 'S', 'D', 'A', 'T', 'A'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("binary dataset: truncated while reading " + what);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

bool TimeSeriesDataset::finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void TimeSeriesDataset::validate() const {
  if (n < 0 || l < 0 || c < 0) throw DataError("dataset: negative extent");
  if (static_cast<int64_t>(values.size()) != n * l * c)
    throw DataError("dataset: payload size does not match extents");
  if (!step_labels.empty() && static_cast<int64_t>(step_labels.size()) != n * l)
    throw DataError("dataset: step label block size mismatch");
  if (!instance_labels.empty() && static_cast<int64_t>(instance_labels.size()) != n)
    throw DataError("dataset: instance label block size mismatch");
  if (!instance_block.empty() && static_cast<int64_t>(instance_block.size()) != n * c)
    throw DataError("dataset: instance block size mismatch");
}

namespace {

TimeSeriesDataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw DataError("empty CSV file " + path, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "instance" || header[1] != "timestep")
    throw DataError("CSV header must start with 'instance,timestep,c0,...'", 1);
  bool has_label = header.back() == "label";
  int64_t channels = static_cast<int64_t>(header.size()) - 2 - (has_label ? 1 : 0);
  if (channels < 1) throw DataError("CSV header declares no value columns", 1);

  struct Row {
    int64_t inst, step;
    std::vector<double> vals;
    int32_t label;
  };
  std::vector<Row> rows;
  int64_t line_no = 1;
  int64_t max_inst = -1, max_step = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int64_t>(fields.size()) != static_cast<int64_t>(header.size()))
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " +
                          std::to_string(header.size()) + " fields, got " +
                          std::to_string(fields.size()),
                      line_no);
    Row row;
    try {
      row.inst = std::stoll(fields[0]);
      row.step = std::stoll(fields[1]);
      row.vals.reserve(static_cast<size_t>(channels));
      for (int64_t ch = 0; ch < channels; ++ch)
        row.vals.push_back(std::stod(fields[static_cast<size_t>(2 + ch)]));
      row.label = has_label ? static_cast<int32_t>(std::stol(fields.back())) : 0;
    } catch (const std::exception&) {
      throw DataError("CSV line " + std::to_string(line_no) + ": unparsable field", line_no);
    }
    if (row.inst < 0 || row.step < 0)
      throw DataError("CSV line " + std::to_string(line_no) + ": negative index", line_no);
    max_inst = std::max(max_inst, row.inst);
    max_step = std::max(max_step, row.step);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("CSV has a header but no data rows", line_no);

  TimeSeriesDataset ds;
  ds.n = max_inst + 1;
  ds.l = max_step + 1;
  ds.c = channels;
  if (static_cast<int64_t>(rows.size()) != ds.n * ds.l)
    throw DataError("CSV: expected " + std::to_string(ds.n * ds.l) + " rows for a " +
                    std::to_string(ds.n) + "x" + std::to_string(ds.l) + " grid, got " +
                    std::to_string(rows.size()));
  ds.values.assign(static_cast<size_t>(ds.n * ds.l * ds.c),
                   std::numeric_limits<double>::quiet_NaN());
  if (has_label) ds.step_labels.assign(static_cast<size_t>(ds.n * ds.l), 0);
  std::vector<char> seen(static_cast<size_t>(ds.n * ds.l), 0);
  for (const auto& row : rows) {
    size_t cell = static_cast<size_t>(row.inst * ds.l + row.step);
    if (seen[cell]) throw DataError("CSV: duplicate (instance,timestep) pair");
    seen[cell] = 1;
    for (int64_t ch = 0; ch < channels; ++ch) ds.at(row.inst, row.step, ch) = row.vals[static_cast<size_t>(ch)];
    if (has_label) ds.step_labels[cell] = row.label;
  }
  for (char s : seen)
    if (!s) throw DataError("CSV: missing (instance,timestep) rows");
  return ds;
}

void save_csv(const TimeSeriesDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << "instance,timestep";
  for (int64_t ch = 0; ch < ds.c; ++ch) os << ",c" << ch;
  bool label = ds.has_step_labels();
  if (label) os << ",label";
  os << "\n";
  os.precision(17);
  for (int64_t i = 0; i < ds.n; ++i)
    for (int64_t t = 0; t < ds.l; ++t) {
      os << i << "," << t;
      for (int64_t ch = 0; ch < ds.c; ++ch) os << "," << ds.at(i, t, ch);
      if (label) os << "," << ds.step_labels[static_cast<size_t>(i * ds.l + t)];
      os << "\n";
    }
}

TimeSeriesDataset load_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("binary dataset: bad magic in " + path);
  uint32_t version = read_pod<uint32_t>(is, "version");
  if (version != kVersion)
    throw DataError("binary dataset: unsupported version " + std::to_string(version));
  uint32_t dtype = read_pod<uint32_t>(is, "dtype");
  if (dtype != 0) throw DataError("binary dataset: unsupported dtype flag");
  TimeSeriesDataset ds;
  ds.n = static_cast<int64_t>(read_pod<uint64_t>(is, "N"));
  ds.l = static_cast<int64_t>(read_pod<uint64_t>(is, "L"));
  ds.c = static_cast<int64_t>(read_pod<uint64_t>(is, "C"));
  uint8_t label_kind = read_pod<uint8_t>(is, "label kind");
  uint8_t has_instance_block = read_pod<uint8_t>(is, "instance block flag");
  int64_t count = ds.n * ds.l * ds.c;
  ds.values.resize(static_cast<size_t>(count));
  is.read(reinterpret_cast<char*>(ds.values.data()), count * 8);
  if (!is) throw DataError("binary dataset: truncated payload");
  if (label_kind == 1) {
    ds.instance_labels.resize(static_cast<size_t>(ds.n));
    is.read(reinterpret_cast<char*>(ds.instance_labels.data()), ds.n * 4);
  } else if (label_kind == 2) {
    ds.step_labels.resize(static_cast<size_t>(ds.n * ds.l));
    is.read(reinterpret_cast<char*>(ds.step_labels.data()), ds.n * ds.l * 4);
  } else if (label_kind != 0) {
    throw DataError("binary dataset: unknown label kind " + std::to_string(label_kind));
  }
  if (!is) throw DataError("binary dataset: truncated label block");
  if (has_instance_block) {
    ds.instance_block.resize(static_cast<size_t>(ds.n * ds.c));
    is.read(reinterpret_cast<char*>(ds.instance_block.data()), ds.n * ds.c * 8);
    if (!is) throw DataError("binary dataset: truncated instance block");
  }
  ds.validate();
  return ds;
}

void save_binary(const TimeSeriesDataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path);
  os.write(kMagic, 8);
  write_pod<uint32_t>(os, kVersion);
  write_pod<uint32_t>(os, 0);  // dtype: f64
  write_pod<uint64_t>(os, static_cast<uint64_t>(ds.n));
  write_pod<uint64_t>(os, static_cast<uint64_t>(ds.l));
  write_pod<uint64_t>(os, static_cast<uint64_t>(ds.c));
  uint8_t label_kind = ds.has_instance_labels() ? 1 : (ds.has_step_labels() ? 2 : 0);
  write_pod<uint8_t>(os, label_kind);
  write_pod<uint8_t>(os, ds.instance_block.empty() ? 0 : 1);
  os.write(reinterpret_cast<const char*>(ds.values.data()),
           static_cast<int64_t>(ds.values.size()) * 8);
  if (label_kind == 1)
    os.write(reinterpret_cast<const char*>(ds.instance_labels.data()), ds.n * 4);
  else if (label_kind == 2)
    os.write(reinterpret_cast<const char*>(ds.step_labels.data()), ds.n * ds.l * 4);
  if (!ds.instance_block.empty())
    os.write(reinterpret_cast<const char*>(ds.instance_block.data()),
             static_cast<int64_t>(ds.instance_block.size()) * 8);
  if (!os) throw DataError("failed while writing " + path);
}

}  // namespace

TimeSeriesDataset load_dataset(const std::string& path, DataFormat format) {
  return format == DataFormat::Csv ? load_csv(path) : load_binary(path);
}

TimeSeriesDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[8] = {0};
  is.read(magic, 8);
  is.close();
  bool binary = std::memcmp(magic, kMagic, 8) == 0;
  return load_dataset(path, binary ? DataFormat::Binary : DataFormat::Csv);
}

void save_dataset(const TimeSeriesDataset& ds, const std::string& path, DataFormat format) {
  if (format == DataFormat::Csv)
    save_csv(ds, path);
  else
    save_binary(ds, path);
}

}  // namespace plants
