#include "plants/model.hpp"

#include <cmath>

namespace plants {

namespace {

// Uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_matrix(Shape shape, int64_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> data(static_cast<size_t>(n));
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from_vector(std::move(shape), std::move(data), /*requires_grad=*/true);
}

}  // namespace

void ModelConfig::validate() const {
  if (in_channels < 1) throw ValueError("model config: in_channels must be >= 1");
  if (hidden < 1 || depth < 0 || kernel < 1 || d_l < 1 || d_t < 1 || head_hidden < 1)
    throw ValueError("model config: non-positive dimension");
}

ConvEncoder::ConvEncoder(int in_channels, int hidden, int depth, int kernel, int out_dim, Rng& rng)
    : in_channels_(in_channels), hidden_(hidden), depth_(depth), kernel_(kernel), out_dim_(out_dim) {
  in_w_ = init_matrix({in_channels, hidden}, in_channels, rng);
  in_b_ = init_matrix({hidden}, in_channels, rng);
  int64_t conv_fan = static_cast<int64_t>(hidden) * kernel;
  for (int b = 0; b < depth; ++b) {
    conv1_w_.push_back(init_matrix({hidden, hidden, kernel}, conv_fan, rng));
    conv1_b_.push_back(init_matrix({hidden}, conv_fan, rng));
    conv2_w_.push_back(init_matrix({hidden, hidden, kernel}, conv_fan, rng));
    conv2_b_.push_back(init_matrix({hidden}, conv_fan, rng));
  }
  out_w_ = init_matrix({hidden, out_dim}, hidden, rng);
  out_b_ = init_matrix({out_dim}, hidden, rng);
}

Tensor ConvEncoder::forward(const Tensor& series) const {
  if (series.ndim() != 2 || series.dim(1) != in_channels_)
    throw ShapeError("encoder", series.shape(), {series.ndim() == 2 ? series.dim(0) : 0, in_channels_});
  Tensor h = linear(series, in_w_, in_b_);
  int dilation = 1;
  for (int b = 0; b < depth_; ++b) {
    Tensor z = conv1d_causal(h, conv1_w_[static_cast<size_t>(b)], conv1_b_[static_cast<size_t>(b)], dilation);
    z = relu(z);
    z = conv1d_causal(z, conv2_w_[static_cast<size_t>(b)], conv2_b_[static_cast<size_t>(b)], dilation);
    h = add(h, z);
    dilation *= 2;
  }
  return linear(h, out_w_, out_b_);
}

std::vector<Tensor> ConvEncoder::parameters() const {
  std::vector<Tensor> params{in_w_, in_b_};
  for (int b = 0; b < depth_; ++b) {
    params.push_back(conv1_w_[static_cast<size_t>(b)]);
    params.push_back(conv1_b_[static_cast<size_t>(b)]);
    params.push_back(conv2_w_[static_cast<size_t>(b)]);
    params.push_back(conv2_b_[static_cast<size_t>(b)]);
  }
  params.push_back(out_w_);
  params.push_back(out_b_);
  return params;
}

PredictionHead::PredictionHead(int in_dim, int hidden, int out_dim, Rng& rng)
    : in_dim_(in_dim), hidden_(hidden), out_dim_(out_dim) {
  w1_ = init_matrix({in_dim, hidden}, in_dim, rng);
  b1_ = init_matrix({hidden}, in_dim, rng);
  w2_ = init_matrix({hidden, out_dim}, hidden, rng);
  b2_ = init_matrix({out_dim}, hidden, rng);
}

Tensor PredictionHead::forward(const Tensor& x) const {
  if (x.ndim() != 2 || x.dim(1) != in_dim_)
    throw ShapeError("prediction_head", x.shape(), {x.ndim() == 2 ? x.dim(0) : 0, in_dim_});
  return linear(relu(linear(x, w1_, b1_)), w2_, b2_);
}

std::vector<Tensor> PredictionHead::parameters() const { return {w1_, b1_, w2_, b2_}; }

PlantsModel::PlantsModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config.seed);
  latent_ = ConvEncoder(config.in_channels, config.hidden, config.depth, config.kernel, config.d_l, rng);
  transition_ =
      ConvEncoder(config.in_channels, config.hidden, config.depth, config.kernel, config.d_t, rng);
  head_ = PredictionHead(config.d_l + config.d_t, config.head_hidden, config.d_t, rng);
}

Tensor PlantsModel::encode_latent(const Tensor& series) const { return latent_.forward(series); }
Tensor PlantsModel::encode_transition(const Tensor& series) const {
  return transition_.forward(series);
}

Tensor PlantsModel::encode_full(const Tensor& series) const {
  return concat({encode_latent(series), encode_transition(series)}, 1);
}

Tensor PlantsModel::predict_next(const Tensor& fused_windows) const {
  return head_.forward(fused_windows);
}

std::vector<Tensor> PlantsModel::parameters() const {
  std::vector<Tensor> params = latent_.parameters();
  auto t = transition_.parameters();
  params.insert(params.end(), t.begin(), t.end());
  auto h = head_.parameters();
  params.insert(params.end(), h.begin(), h.end());
  return params;
}

void PlantsModel::zero_grads() {
  for (auto& p : parameters()) p.zero_grad();
}

Tensor pool_window(const Tensor& window, int64_t valid_len) {
  if (window.ndim() != 2) throw ValueError("pool_window: expected a (w, D) tensor");
  if (valid_len <= 0) throw ValueError("pool_window: all-padded window (valid_len == 0)");
  if (valid_len > window.dim(0)) throw ValueError("pool_window: valid_len exceeds window");
  Tensor rows = (valid_len == window.dim(0)) ? window : slice(window, 0, 0, valid_len);
  return mean(rows, 0);
}

Tensor pool_rows(const Tensor& embedding, int64_t start, int64_t valid_len) {
  if (embedding.ndim() != 2) throw ValueError("pool_rows: expected a (L, D) tensor");
  if (valid_len <= 0) throw ValueError("pool_rows: all-padded window (valid_len == 0)");
  return mean(slice(embedding, 0, start, start + valid_len), 0);
}

std::vector<double> max_pool_over_time(const Tensor& embedding) {
  if (embedding.ndim() != 2) throw ValueError("max_pool_over_time: expected a (L, D) tensor");
  const int64_t l = embedding.dim(0), d = embedding.dim(1);
  const auto v = embedding.values();
  std::vector<double> out(static_cast<size_t>(d), -HUGE_VAL);
  for (int64_t t = 0; t < l; ++t)
    for (int64_t j = 0; j < d; ++j)
      out[static_cast<size_t>(j)] = std::max(out[static_cast<size_t>(j)], v[static_cast<size_t>(t * d + j)]);
  return out;
}

}  // namespace plants
