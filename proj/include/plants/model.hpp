#pragma once

#include <cstdint>
#include <vector>

#include "plants/rng.hpp"
#include "plants/tensor.hpp"

namespace plants {

struct ModelConfig {
  int in_channels = 0;
  int hidden = 32;
  int depth = 4;       // residual blocks; dilation doubles per block
  int kernel = 3;
  int d_l = 16;        // latent state width
  int d_t = 16;        // dynamic transition width
  int head_hidden = 32;
  uint64_t seed = 0;

  int fused_dim() const { return d_l + d_t; }
  void validate() const;
};

// Dilated causal temporal conv stack: per-timestep input projection C -> H,
// `depth` residual blocks (conv -> relu -> conv, dilation 1,2,4,...), output
// projection H -> out_dim. Output at time t depends only on inputs at <= t.
class ConvEncoder {
 public:
  ConvEncoder() = default;
  ConvEncoder(int in_channels, int hidden, int depth, int kernel, int out_dim, Rng& rng);

  Tensor forward(const Tensor& series) const;  // (L, C) -> (L, out_dim)
  // Handles share storage with the encoder; updating them updates the model.
  std::vector<Tensor> parameters() const;
  int out_dim() const { return out_dim_; }
  int in_channels() const { return in_channels_; }

 private:
  int in_channels_ = 0, hidden_ = 0, depth_ = 0, kernel_ = 0, out_dim_ = 0;
  Tensor in_w_, in_b_;
  std::vector<Tensor> conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  Tensor out_w_, out_b_;
};

// Two affine layers with a ReLU between: (D_l + D_t) -> D_t.
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(int in_dim, int hidden, int out_dim, Rng& rng);

  Tensor forward(const Tensor& x) const;  // (m, in_dim) -> (m, out_dim)
  std::vector<Tensor> parameters() const;
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  int in_dim_ = 0, hidden_ = 0, out_dim_ = 0;
  Tensor w1_, b1_, w2_, b2_;
};

// The full model: latent state encoder f_L, dynamic transition encoder f_T
// (independent parameters), prediction head G. Granularities share the
// encoders; patching happens on the per-timestep embeddings.
class PlantsModel {
 public:
  PlantsModel() = default;
  explicit PlantsModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  Tensor encode_latent(const Tensor& series) const;      // (L, C) -> (L, D_l)
  Tensor encode_transition(const Tensor& series) const;  // (L, C) -> (L, D_t)
  Tensor encode_full(const Tensor& series) const;        // (L, C) -> (L, D_l + D_t)
  Tensor predict_next(const Tensor& fused_windows) const;  // (m, D_l+D_t) -> (m, D_t)

  std::vector<Tensor> parameters() const;
  void zero_grads();

  // Serialization hooks used by the checkpoint module.
  PredictionHead& head() { return head_; }
  const PredictionHead& head() const { return head_; }

 private:
  ModelConfig config_;
  ConvEncoder latent_, transition_;
  PredictionHead head_;
};

// Mean over the first `valid_len` rows of a (w, D) window embedding; padded
// rows are excluded. valid_len == 0 (an all-padded window) is an error.
Tensor pool_window(const Tensor& window, int64_t valid_len);

// Pool the rows [start, start+valid_len) of a (L, D) embedding.
Tensor pool_rows(const Tensor& embedding, int64_t start, int64_t valid_len);

// Instance-level vector: per-column max over time of an (L, D) embedding.
// Plain values, no graph (used for frozen-representation probes).
std::vector<double> max_pool_over_time(const Tensor& embedding);

}  // namespace plants
