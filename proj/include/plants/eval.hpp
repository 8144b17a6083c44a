#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plants/checkpoint.hpp"
#include "plants/dataset.hpp"
#include "plants/model.hpp"
#include "plants/training.hpp"

namespace plants {

// ---- synthetic data --------------------------------------------------------

// Per-state emission: a sinusoid (period in samples, amplitude, additive
// noise; channel c is phase-shifted by 2*pi*c/C) or an AR(2) process per
// channel (must be stationary).
struct EmissionRegime {
  enum class Kind { Sinusoid, Ar2 } kind = Kind::Sinusoid;
  double period = 25.0;
  double amplitude = 1.0;
  double noise = 0.1;
  double phi1 = 0.0, phi2 = 0.0;  // AR(2)
};

struct HmmSpec {
  int states = 0;
  std::vector<double> transition;  // states x states, rows sum to 1
  std::vector<EmissionRegime> regimes;
  int dwell = 25;  // the chain resamples its state every `dwell` steps

  void validate() const;

  // S-state presets over sinusoid regimes with distinct periods/amplitudes.
  static HmmSpec cyclic(int states, int dwell, double noise);    // s -> s+1 mod S
  static HmmSpec uniform(int states, int dwell, double noise);   // uniform rows
  static HmmSpec identity(int states, int dwell, double noise);  // absorbing
};

// Reproducible N x L x C dataset with per-timestep state labels.
TimeSeriesDataset gen_hmm_mts(const HmmSpec& spec, int64_t n, int64_t l, int64_t c, uint64_t seed);

// ---- representations -------------------------------------------------------

// Standardizes with the checkpointed record, encodes every instance
// (frozen parameters, no graph) and max-pools the instance block.
TimeSeriesDataset encode_dataset(const PlantsModel& model, const Standardizer& standardizer,
                                 const TimeSeriesDataset& dataset);

// ---- probes ----------------------------------------------------------------

struct Matrix {
  int64_t rows = 0, cols = 0;
  std::vector<double> v;
  double at(int64_t i, int64_t j) const { return v[static_cast<size_t>(i * cols + j)]; }
  double& at(int64_t i, int64_t j) { return v[static_cast<size_t>(i * cols + j)]; }
  std::span<const double> row(int64_t i) const {
    return {v.data() + i * cols, static_cast<size_t>(cols)};
  }
};

enum class ProbeKind { Linear, Knn };

// Pooled window representations with majority-vote state labels: one row per
// (instance, window) with at least half of its timesteps unpadded. Requires
// per-timestep labels when `require_labels` is set.
struct WindowReps {
  Matrix x;                // rows x (D_l + D_t)
  std::vector<int32_t> y;  // majority step label per window
  std::vector<int64_t> instance;  // source instance of each row
  int64_t windows_per_instance = 0;
};

WindowReps window_representations(const PlantsModel& model, const Standardizer& standardizer,
                                  const TimeSeriesDataset& dataset, int window,
                                  bool require_labels = true);

struct ProbeReport {
  std::string task;
  double accuracy = 0.0;
  double chance = 0.0;
  uint64_t seed = 0;
};

// Linear: multinomial logistic regression by full-batch gradient descent on
// frozen representations. Knn: k=5 cosine-distance vote. Train must contain
// at least 2 classes.
ProbeReport classify_probe(const Matrix& train_x, const std::vector<int32_t>& train_y,
                           const Matrix& test_x, const std::vector<int32_t>& test_y,
                           ProbeKind kind, uint64_t seed = 0);

struct HorizonMetric {
  int horizon = 0;
  double mse = 0.0, mae = 0.0;
  double baseline_mse = 0.0, baseline_mae = 0.0;  // ridge on raw last-w values
};

struct ForecastReport {
  std::vector<HorizonMetric> horizons;
  uint64_t seed = 0;
};

// Ridge regression (closed form, regularizer `ridge`) from the per-timestep
// representation z_t to the next-H flattened raw values, with a raw-window
// baseline column; errors measured on a held-out instance split.
ForecastReport forecast_probe(const TimeSeriesDataset& representations,
                              const TimeSeriesDataset& raw, const std::vector<int>& horizons,
                              double ridge = 1e-2, double test_fraction = 0.25,
                              int baseline_window = 16);

// ---- anomaly scoring -------------------------------------------------------

// L1 distance at position t between the encodings of the series as-is and
// with the observation at t masked to 0 (post-standardization). `series` is
// the raw L x C signal.
double anomaly_score(const PlantsModel& model, const Standardizer& standardizer,
                     std::span<const double> series, int64_t l, int64_t c, int64_t t);

// Scores every position of one instance.
std::vector<double> anomaly_scores(const PlantsModel& model, const Standardizer& standardizer,
                                   std::span<const double> series, int64_t l, int64_t c);

// Rank-based AUROC of positive scores vs negative scores.
double auroc(const std::vector<double>& positives, const std::vector<double>& negatives);

// ---- misc ------------------------------------------------------------------

// d-fold first differencing along time; output length L-d.
std::vector<double> difference(std::span<const double> series, int64_t l, int64_t c, int d);

struct PcaResult {
  Matrix projection;                     // T x n_components
  std::vector<double> explained_ratio;   // per component
  int components = 0;
};

// Center, eigendecompose the covariance, project onto the top components.
// Sign convention: the largest-magnitude loading of each component is
// positive. Rank deficiency returns fewer components (with a warning on
// stderr).
PcaResult trajectory_pca(const Matrix& x, int components = 3);

// ---- runtime benchmark (Appendix-E-style) -----------------------------------

struct BenchResult {
  std::string kernel;
  int64_t l = 0, n = 0, c = 0;
  int threads = 1, repeats = 3;
  double precompute_mean = 0.0, precompute_std = 0.0;
  double epoch_mean = 0.0, epoch_std = 0.0;
  double total_mean = 0.0;
  std::string csv_row() const;
  static std::string csv_header();
};

// Wall-clock cost of building the full pairwise window-similarity structure
// on simulated data. kernel "dtw": the N x N full-series DTW matrix (the
// precompute phase; per-epoch is zero). kernel "mxcorr": no precompute;
// per-epoch covers every local batch matrix plus the per-instance global
// matrices for one epoch at batch size min(128, N).
BenchResult bench_similarity(int64_t l, int64_t n, int64_t c, const std::string& kernel,
                             int threads = 1, int repeats = 3, uint64_t seed = 0);

}  // namespace plants
