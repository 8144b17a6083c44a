#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plants/errors.hpp"

namespace plants {

using Shape = std::vector<int64_t>;

namespace detail {
struct TensorNode;
}

// Thread-local switch: when grad mode is off, ops never record the graph.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Dense row-major tensor of doubles with reverse-mode autodiff. Value
// semantics on a shared node: copies alias the same storage and graph
// record. Gradients accumulate across backward() calls until zero_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int64_t dim(int axis) const;
  int64_t numel() const;
  bool requires_grad() const;
  void set_requires_grad(bool value);  // leaf tensors only
  bool is_leaf() const;

  std::span<const double> values() const;
  // Direct mutable access to storage; does not touch the graph. Intended for
  // parameter updates between steps.
  std::span<double> raw_values();

  double value() const;  // scalar tensors only
  double at(int64_t i) const;
  double at(int64_t i, int64_t j) const;

  std::span<const double> grad() const;  // zeros if never written
  void zero_grad();

  // Detached copy of the values: same data, fresh leaf, no graph history.
  Tensor detach() const;

  detail::TensorNode* node() const { return node_.get(); }

 private:
  friend Tensor make_tensor(Shape, std::vector<double>, bool);
  friend class GraphBuilder;
  std::shared_ptr<detail::TensorNode> node_;
};

// ---- elementwise / arithmetic -------------------------------------------
// Same-shape elementwise, or one side a single-element tensor (the only
// broadcasting form supported; all other coercion must be explicit).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // any zero divisor -> DomainError

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // any non-positive element -> DomainError
Tensor sqrt(const Tensor& a);  // any negative element -> DomainError
Tensor relu(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);

// ---- linear algebra ------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);           // (m,k) x (k,n)
Tensor transpose(const Tensor& a);                         // 2-D
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // (m,k)x(k,n)+row bias
Tensor dot(const Tensor& a, const Tensor& b);              // 1-D -> scalar

// Dilated causal 1-D convolution. input (L, Cin), weight (Cout, Cin, k),
// bias (Cout); output (L, Cout). Pads on the left only:
//   out[t, co] = bias[co] + sum_{j,ci} weight[co, ci, j] * input[t - j*dilation, ci]
// with out-of-range input treated as zero.
Tensor conv1d_causal(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation);

// ---- softmax family ------------------------------------------------------
Tensor softmax(const Tensor& a, int axis);      // max-subtracted, rows sum to 1
Tensor log_softmax(const Tensor& a, int axis);

// ---- reductions (64-bit accumulation throughout) --------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, int axis);   // 2-D only
Tensor mean(const Tensor& a, int axis);  // 2-D only
Tensor squared_error(const Tensor& a, const Tensor& b);  // sum((a-b)^2) -> scalar

// ---- structure -----------------------------------------------------------
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor stack(const std::vector<Tensor>& rows);  // n 1-D tensors of width d -> (n, d)
Tensor slice(const Tensor& a, int axis, int64_t start, int64_t stop);
Tensor reshape(const Tensor& a, Shape shape);

// ---- autodiff ------------------------------------------------------------
// Reverse-mode sweep from a scalar loss. Visits each recorded node exactly
// once; leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& loss);

// Max over coordinates of |analytic - numeric| / max(1, |numeric|), with
// numeric gradients from central differences at step eps. f must be
// scalar-valued.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double eps = 1e-5);

}  // namespace plants
