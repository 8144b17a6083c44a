#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plants/dataset.hpp"
#include "plants/model.hpp"
#include "plants/periodicity.hpp"

namespace plants {

// Per-channel affine preprocessing fitted on the training split. Constant
// channels keep their mean and get std clamped to 1.
struct Standardizer {
  std::vector<double> mean, stddev;

  static Standardizer fit(const TimeSeriesDataset& ds);
  void apply(TimeSeriesDataset& ds) const;
  void invert(TimeSeriesDataset& ds) const;
  TimeSeriesDataset applied(const TimeSeriesDataset& ds) const;
};

struct TrainingConfig {
  double alpha = 0.5;   // local/global blend, Eq. 5
  double lambda = 0.5;  // contrastive/NTP blend, Eq. 7
  int k = 3;            // top-K periods; ignored when windows is non-empty
  std::vector<int> windows;
  int batch_size = 128;
  double lr = 1e-3;
  int epochs = 50;
  uint64_t seed = 0;
  int hidden = 32, depth = 4, kernel = 3, d_l = 16, d_t = 16, head_hidden = 32;
  double temperature = 1.0;          // divides both similarity and logit rows
  bool normalize_embeddings = false; // L2-normalize pooled windows before dots
  bool ntp_stop_gradient = false;    // detach the NTP target v^{m+1}
  bool early_stop = true;            // 10-epoch plateau, rel. improvement < 1e-4
  int threads = 1;

  bool explicit_windows = false;  // set when windows came from the user
  void validate() const;          // B >= 2; exactly one of {k, windows}
};

// Per-epoch loss components for one granularity. Skipped terms (zero blend
// weight or M < 2) are reported as NaN and logged as "skipped".
struct EpochGranularityLoss {
  int window = 0;
  double local = 0.0, global = 0.0, ntp = 0.0, blended = 0.0;
  bool local_skipped = false, global_skipped = false, ntp_skipped = false;
};

struct EpochRecord {
  int epoch = 0;
  std::vector<EpochGranularityLoss> per_granularity;
  double total = 0.0;
};

struct RunArtifacts {
  std::string checkpoint_path, loss_log_path, manifest_path;
  TrainingConfig config;
  PeriodSet periods;
  std::vector<EpochRecord> epochs;
  int epochs_run = 0;
  double final_loss = 0.0;
  double first_batch_loss = 0.0;  // Eq. 7 on the first batch of epoch 1
  int64_t global_sims_computed = 0, global_sim_cache_hits = 0;
};

// Full self-supervised run: Eq. 1 once on the training split, then per epoch
// shuffle/batch/encode/segment, similarity targets, Eq. 7, Adam. Writes the
// checkpoint, a loss CSV, and a run manifest under out_dir. Deterministic
// for a fixed seed in single-threaded mode.
RunArtifacts train(const TrainingConfig& config, const TimeSeriesDataset& dataset,
                   const std::string& out_dir);

// Standard bias-corrected Adam on one parameter (t is 1-based).
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, int64_t t, double lr, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step();       // reads each parameter's accumulated gradient
  void zero_grads();
  int64_t timestep() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace plants
