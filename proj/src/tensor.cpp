#include "plants/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace plants {

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

using detail::TensorNode;

namespace {

thread_local bool g_grad_enabled = true;

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> data) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return node;
}

void check_finite_shape(const Shape& s, const char* op) {
  for (int64_t d : s)
    if (d < 0) throw ValueError(std::string(op) + ": negative extent in shape");
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// ---- Tensor basics ---------------------------------------------------------

Tensor make_tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  check_finite_shape(shape, "tensor");
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw ValueError("tensor: shape does not match element count");
  Tensor t;
  t.node_ = new_node(std::move(shape), std::move(data));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  int64_t n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                     requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  int64_t n = shape_numel(shape);
  return make_tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), value),
                     requires_grad);
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> data, bool requires_grad) {
  return make_tensor(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return make_tensor(Shape{}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }
int64_t Tensor::dim(int axis) const { return node_->shape.at(static_cast<size_t>(axis)); }
int64_t Tensor::numel() const { return node_->numel(); }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_->is_leaf) throw ValueError("set_requires_grad: only leaf tensors");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_->is_leaf; }

std::span<const double> Tensor::values() const { return node_->data; }
std::span<double> Tensor::raw_values() { return node_->data; }

double Tensor::value() const {
  if (numel() != 1) throw ValueError("value(): tensor is not scalar");
  return node_->data[0];
}

double Tensor::at(int64_t i) const { return node_->data.at(static_cast<size_t>(i)); }
double Tensor::at(int64_t i, int64_t j) const {
  return node_->data.at(static_cast<size_t>(i * node_->shape.at(1) + j));
}

std::span<const double> Tensor::grad() const {
  const_cast<TensorNode*>(node_.get())->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detach() const {
  Tensor t;
  t.node_ = new_node(node_->shape, node_->data);
  return t;
}

// ---- graph recording -------------------------------------------------------

class GraphBuilder {
 public:
  static Tensor result(const char* op, Shape shape, std::vector<double> data,
                       std::vector<Tensor> inputs,
                       std::function<void(TensorNode&)> backward_fn) {
    Tensor out;
    out.node_ = new_node(std::move(shape), std::move(data));
    out.node_->op = op;
    bool track = g_grad_enabled;
    if (track) {
      bool any = false;
      for (const auto& in : inputs) any = any || in.requires_grad();
      track = any;
    }
    if (track) {
      out.node_->requires_grad = true;
      out.node_->is_leaf = false;
      out.node_->parents.reserve(inputs.size());
      for (auto& in : inputs) out.node_->parents.push_back(in.node_);
      out.node_->backward_fn = std::move(backward_fn);
    }
    return out;
  }
};

namespace {

// Shorthand for op implementations below.
Tensor record(const char* op, Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
              std::function<void(TensorNode&)> backward_fn) {
  return GraphBuilder::result(op, std::move(shape), std::move(data), std::move(inputs),
                              std::move(backward_fn));
}

void accumulate(TensorNode& parent, const std::vector<double>& contribution) {
  auto& g = parent.ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) g[i] += contribution[i];
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

enum class EwMode { Same, ScalarLhs, ScalarRhs };

EwMode ew_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (same_shape(a, b)) return EwMode::Same;
  if (a.numel() == 1) return EwMode::ScalarLhs;
  if (b.numel() == 1) return EwMode::ScalarRhs;
  throw ShapeError(op, a.shape(), b.shape());
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_ew(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, BwdA dfa, BwdB dfb) {
  EwMode mode = ew_mode(op, a, b);
  const auto av = a.values();
  const auto bv = b.values();
  Shape out_shape = (mode == EwMode::ScalarLhs) ? b.shape() : a.shape();
  int64_t n = (mode == EwMode::ScalarLhs) ? b.numel() : a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double x = (mode == EwMode::ScalarLhs) ? av[0] : av[static_cast<size_t>(i)];
    double y = (mode == EwMode::ScalarRhs) ? bv[0] : bv[static_cast<size_t>(i)];
    out[static_cast<size_t>(i)] = fwd(x, y);
  }
  return record(op, std::move(out_shape), std::move(out), {a, b},
                [a, b, mode, dfa, dfb, n](TensorNode& node) {
                  const auto av2 = a.values();
                  const auto bv2 = b.values();
                  if (a.requires_grad()) {
                    std::vector<double> ga(static_cast<size_t>(a.numel()), 0.0);
                    for (int64_t i = 0; i < n; ++i) {
                      double x = (mode == EwMode::ScalarLhs) ? av2[0] : av2[static_cast<size_t>(i)];
                      double y = (mode == EwMode::ScalarRhs) ? bv2[0] : bv2[static_cast<size_t>(i)];
                      double g = node.grad[static_cast<size_t>(i)] * dfa(x, y);
                      ga[(mode == EwMode::ScalarLhs) ? 0 : static_cast<size_t>(i)] += g;
                    }
                    accumulate(*a.node(), ga);
                  }
                  if (b.requires_grad()) {
                    std::vector<double> gb(static_cast<size_t>(b.numel()), 0.0);
                    for (int64_t i = 0; i < n; ++i) {
                      double x = (mode == EwMode::ScalarLhs) ? av2[0] : av2[static_cast<size_t>(i)];
                      double y = (mode == EwMode::ScalarRhs) ? bv2[0] : bv2[static_cast<size_t>(i)];
                      double g = node.grad[static_cast<size_t>(i)] * dfb(x, y);
                      gb[(mode == EwMode::ScalarRhs) ? 0 : static_cast<size_t>(i)] += g;
                    }
                    accumulate(*b.node(), gb);
                  }
                });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.values())
    if (y == 0.0) throw DomainError("div: division by zero");
  return binary_ew(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_ew(const char* op, const Tensor& a, Fwd fwd, Bwd dfa) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return record(op, a.shape(), std::move(out), {a}, [a, dfa](TensorNode& node) {
    if (!a.requires_grad()) return;
    const auto av2 = a.values();
    std::vector<double> ga(av2.size());
    for (size_t i = 0; i < av2.size(); ++i) ga[i] = node.grad[i] * dfa(av2[i], node.data[i]);
    accumulate(*a.node(), ga);
  });
}

}  // namespace

Tensor exp(const Tensor& a) {
  return unary_ew(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values())
    if (x <= 0.0) throw DomainError("log: argument out of domain (<= 0)");
  return unary_ew(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values())
    if (x < 0.0) throw DomainError("sqrt: negative argument");
  return unary_ew(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor relu(const Tensor& a) {
  return unary_ew(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor neg(const Tensor& a) {
  return unary_ew(
      "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_ew(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul", a.shape(), b.shape());
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      double x = av[static_cast<size_t>(i * k + p)];
      const double* brow = &bv[static_cast<size_t>(p * n)];
      double* orow = &out[static_cast<size_t>(i * n)];
      for (int64_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  return record("matmul", {m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorNode& node) {
    const auto av2 = a.values();
    const auto bv2 = b.values();
    if (a.requires_grad()) {
      std::vector<double> ga(static_cast<size_t>(m * k), 0.0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          double g = node.grad[static_cast<size_t>(i * n + j)];
          for (int64_t p = 0; p < k; ++p)
            ga[static_cast<size_t>(i * k + p)] += g * bv2[static_cast<size_t>(p * n + j)];
        }
      accumulate(*a.node(), ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(static_cast<size_t>(k * n), 0.0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          double x = av2[static_cast<size_t>(i * k + p)];
          const double* grow = &node.grad[static_cast<size_t>(i * n)];
          double* gbrow = &gb[static_cast<size_t>(p * n)];
          for (int64_t j = 0; j < n; ++j) gbrow[j] += x * grow[j];
        }
      accumulate(*b.node(), gb);
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError("transpose", a.shape(), {});
  const int64_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  std::vector<double> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = av[static_cast<size_t>(i * n + j)];
  return record("transpose", {n, m}, std::move(out), {a}, [a, m, n](TensorNode& node) {
    if (!a.requires_grad()) return;
    std::vector<double> ga(static_cast<size_t>(m * n));
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        ga[static_cast<size_t>(i * n + j)] = node.grad[static_cast<size_t>(j * m + i)];
    accumulate(*a.node(), ga);
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(0))
    throw ShapeError("linear", x.shape(), w.shape());
  if (b.ndim() != 1 || b.dim(0) != w.dim(1)) throw ShapeError("linear", w.shape(), b.shape());
  const int64_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  const auto xv = x.values();
  const auto wv = w.values();
  const auto bv = b.values();
  std::vector<double> out(static_cast<size_t>(m * n));
  for (int64_t i = 0; i < m; ++i) {
    double* orow = &out[static_cast<size_t>(i * n)];
    for (int64_t j = 0; j < n; ++j) orow[j] = bv[static_cast<size_t>(j)];
    for (int64_t p = 0; p < k; ++p) {
      double xi = xv[static_cast<size_t>(i * k + p)];
      const double* wrow = &wv[static_cast<size_t>(p * n)];
      for (int64_t j = 0; j < n; ++j) orow[j] += xi * wrow[j];
    }
  }
  return record("linear", {m, n}, std::move(out), {x, w, b}, [x, w, b, m, k, n](TensorNode& node) {
    const auto xv2 = x.values();
    const auto wv2 = w.values();
    if (x.requires_grad()) {
      std::vector<double> gx(static_cast<size_t>(m * k), 0.0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          const double* wrow = &wv2[static_cast<size_t>(p * n)];
          const double* grow = &node.grad[static_cast<size_t>(i * n)];
          double acc = 0.0;
          for (int64_t j = 0; j < n; ++j) acc += grow[j] * wrow[j];
          gx[static_cast<size_t>(i * k + p)] += acc;
        }
      accumulate(*x.node(), gx);
    }
    if (w.requires_grad()) {
      std::vector<double> gw(static_cast<size_t>(k * n), 0.0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          double xi = xv2[static_cast<size_t>(i * k + p)];
          const double* grow = &node.grad[static_cast<size_t>(i * n)];
          double* gwrow = &gw[static_cast<size_t>(p * n)];
          for (int64_t j = 0; j < n; ++j) gwrow[j] += xi * grow[j];
        }
      accumulate(*w.node(), gw);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(static_cast<size_t>(n), 0.0);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) gb[static_cast<size_t>(j)] += node.grad[static_cast<size_t>(i * n + j)];
      accumulate(*b.node(), gb);
    }
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.dim(0) != b.dim(0))
    throw ShapeError("dot", a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return record("dot", {}, {acc}, {a, b}, [a, b](TensorNode& node) {
    double g = node.grad[0];
    const auto av2 = a.values();
    const auto bv2 = b.values();
    if (a.requires_grad()) {
      std::vector<double> ga(av2.size());
      for (size_t i = 0; i < av2.size(); ++i) ga[i] = g * bv2[i];
      accumulate(*a.node(), ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(bv2.size());
      for (size_t i = 0; i < bv2.size(); ++i) gb[i] = g * av2[i];
      accumulate(*b.node(), gb);
    }
  });
}

Tensor conv1d_causal(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
  if (input.ndim() != 2 || weight.ndim() != 3 || input.dim(1) != weight.dim(1))
    throw ShapeError("conv1d_causal", input.shape(), weight.shape());
  if (bias.ndim() != 1 || bias.dim(0) != weight.dim(0))
    throw ShapeError("conv1d_causal", weight.shape(), bias.shape());
  if (dilation < 1) throw ValueError("conv1d_causal: dilation must be >= 1");
  const int64_t len = input.dim(0), cin = input.dim(1);
  const int64_t cout = weight.dim(0), k = weight.dim(2);
  const auto xv = input.values();
  const auto wv = weight.values();
  const auto bv = bias.values();
  std::vector<double> out(static_cast<size_t>(len * cout));
  for (int64_t t = 0; t < len; ++t) {
    double* orow = &out[static_cast<size_t>(t * cout)];
    for (int64_t co = 0; co < cout; ++co) orow[co] = bv[static_cast<size_t>(co)];
    for (int64_t j = 0; j < k; ++j) {
      int64_t src = t - j * dilation;
      if (src < 0) continue;  // causal left padding
      const double* xrow = &xv[static_cast<size_t>(src * cin)];
      for (int64_t co = 0; co < cout; ++co) {
        const double* wrow = &wv[static_cast<size_t>((co * cin) * k + j)];
        double acc = 0.0;
        for (int64_t ci = 0; ci < cin; ++ci) acc += xrow[ci] * wrow[ci * k];
        orow[co] += acc;
      }
    }
  }
  return record("conv1d_causal", {len, cout}, std::move(out), {input, weight, bias},
                [input, weight, bias, dilation, len, cin, cout, k](TensorNode& node) {
                  const auto xv2 = input.values();
                  const auto wv2 = weight.values();
                  if (input.requires_grad()) {
                    std::vector<double> gx(static_cast<size_t>(len * cin), 0.0);
                    for (int64_t t = 0; t < len; ++t) {
                      const double* grow = &node.grad[static_cast<size_t>(t * cout)];
                      for (int64_t j = 0; j < k; ++j) {
                        int64_t src = t - j * dilation;
                        if (src < 0) continue;
                        double* gxrow = &gx[static_cast<size_t>(src * cin)];
                        for (int64_t co = 0; co < cout; ++co) {
                          double g = grow[co];
                          if (g == 0.0) continue;
                          const double* wrow = &wv2[static_cast<size_t>((co * cin) * k + j)];
                          for (int64_t ci = 0; ci < cin; ++ci) gxrow[ci] += g * wrow[ci * k];
                        }
                      }
                    }
                    accumulate(*input.node(), gx);
                  }
                  if (weight.requires_grad()) {
                    std::vector<double> gw(static_cast<size_t>(cout * cin * k), 0.0);
                    for (int64_t t = 0; t < len; ++t) {
                      const double* grow = &node.grad[static_cast<size_t>(t * cout)];
                      for (int64_t j = 0; j < k; ++j) {
                        int64_t src = t - j * dilation;
                        if (src < 0) continue;
                        const double* xrow = &xv2[static_cast<size_t>(src * cin)];
                        for (int64_t co = 0; co < cout; ++co) {
                          double g = grow[co];
                          if (g == 0.0) continue;
                          double* gwrow = &gw[static_cast<size_t>((co * cin) * k + j)];
                          for (int64_t ci = 0; ci < cin; ++ci) gwrow[ci * k] += g * xrow[ci];
                        }
                      }
                    }
                    accumulate(*weight.node(), gw);
                  }
                  if (bias.requires_grad()) {
                    std::vector<double> gb(static_cast<size_t>(cout), 0.0);
                    for (int64_t t = 0; t < len; ++t)
                      for (int64_t co = 0; co < cout; ++co)
                        gb[static_cast<size_t>(co)] += node.grad[static_cast<size_t>(t * cout + co)];
                    accumulate(*bias.node(), gb);
                  }
                });
}

// ---- softmax family --------------------------------------------------------

namespace {

struct AxisView {
  int64_t outer, n, stride, group;  // iterate: base = o*group, idx = base + i*stride
};

AxisView axis_view(const Tensor& a, int axis, const char* op) {
  if (a.ndim() == 1) {
    if (axis != 0) throw ValueError(std::string(op) + ": axis out of range");
    return {1, a.dim(0), 1, a.dim(0)};
  }
  if (a.ndim() == 2) {
    if (axis == 0) return {a.dim(1), a.dim(0), a.dim(1), 1};
    if (axis == 1) return {a.dim(0), a.dim(1), 1, a.dim(1)};
    throw ValueError(std::string(op) + ": axis out of range");
  }
  throw ValueError(std::string(op) + ": only 1-D and 2-D tensors supported");
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  AxisView v = axis_view(a, axis, "softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (int64_t o = 0; o < v.outer; ++o) {
    int64_t base = o * v.group;
    double mx = -HUGE_VAL;
    for (int64_t i = 0; i < v.n; ++i) mx = std::max(mx, av[static_cast<size_t>(base + i * v.stride)]);
    double denom = 0.0;
    for (int64_t i = 0; i < v.n; ++i) {
      double e = std::exp(av[static_cast<size_t>(base + i * v.stride)] - mx);
      out[static_cast<size_t>(base + i * v.stride)] = e;
      denom += e;
    }
    for (int64_t i = 0; i < v.n; ++i) out[static_cast<size_t>(base + i * v.stride)] /= denom;
  }
  return record("softmax", a.shape(), std::move(out), {a}, [a, v](TensorNode& node) {
    if (!a.requires_grad()) return;
    std::vector<double> ga(node.data.size());
    for (int64_t o = 0; o < v.outer; ++o) {
      int64_t base = o * v.group;
      double inner = 0.0;
      for (int64_t i = 0; i < v.n; ++i) {
        size_t idx = static_cast<size_t>(base + i * v.stride);
        inner += node.grad[idx] * node.data[idx];
      }
      for (int64_t i = 0; i < v.n; ++i) {
        size_t idx = static_cast<size_t>(base + i * v.stride);
        ga[idx] = node.data[idx] * (node.grad[idx] - inner);
      }
    }
    accumulate(*a.node(), ga);
  });
}

Tensor log_softmax(const Tensor& a, int axis) {
  AxisView v = axis_view(a, axis, "log_softmax");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (int64_t o = 0; o < v.outer; ++o) {
    int64_t base = o * v.group;
    double mx = -HUGE_VAL;
    for (int64_t i = 0; i < v.n; ++i) mx = std::max(mx, av[static_cast<size_t>(base + i * v.stride)]);
    double denom = 0.0;
    for (int64_t i = 0; i < v.n; ++i) denom += std::exp(av[static_cast<size_t>(base + i * v.stride)] - mx);
    double lse = mx + std::log(denom);
    for (int64_t i = 0; i < v.n; ++i) {
      size_t idx = static_cast<size_t>(base + i * v.stride);
      out[idx] = av[idx] - lse;
    }
  }
  return record("log_softmax", a.shape(), std::move(out), {a}, [a, v](TensorNode& node) {
    if (!a.requires_grad()) return;
    std::vector<double> ga(node.data.size());
    for (int64_t o = 0; o < v.outer; ++o) {
      int64_t base = o * v.group;
      double gsum = 0.0;
      for (int64_t i = 0; i < v.n; ++i) gsum += node.grad[static_cast<size_t>(base + i * v.stride)];
      for (int64_t i = 0; i < v.n; ++i) {
        size_t idx = static_cast<size_t>(base + i * v.stride);
        ga[idx] = node.grad[idx] - std::exp(node.data[idx]) * gsum;
      }
    }
    accumulate(*a.node(), ga);
  });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  return record("sum", {}, {acc}, {a}, [a](TensorNode& node) {
    if (!a.requires_grad()) return;
    std::vector<double> ga(static_cast<size_t>(a.numel()), node.grad[0]);
    accumulate(*a.node(), ga);
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ValueError("mean: empty tensor");
  double acc = 0.0;
  for (double x : a.values()) acc += x;
  double inv = 1.0 / static_cast<double>(a.numel());
  return record("mean", {}, {acc * inv}, {a}, [a, inv](TensorNode& node) {
    if (!a.requires_grad()) return;
    std::vector<double> ga(static_cast<size_t>(a.numel()), node.grad[0] * inv);
    accumulate(*a.node(), ga);
  });
}

namespace {

Tensor reduce_axis(const char* op, const Tensor& a, int axis, bool take_mean) {
  if (a.ndim() != 2) throw ValueError(std::string(op) + ": axis reduction requires 2-D tensor");
  if (axis != 0 && axis != 1) throw ValueError(std::string(op) + ": axis out of range");
  const int64_t m = a.dim(0), n = a.dim(1);
  const auto av = a.values();
  int64_t out_n = (axis == 0) ? n : m;
  int64_t red_n = (axis == 0) ? m : n;
  std::vector<double> out(static_cast<size_t>(out_n), 0.0);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      out[static_cast<size_t>(axis == 0 ? j : i)] += av[static_cast<size_t>(i * n + j)];
  double factor = take_mean ? 1.0 / static_cast<double>(red_n) : 1.0;
  if (take_mean)
    for (auto& x : out) x *= factor;
  return record(op, {out_n}, std::move(out), {a}, [a, axis, m, n, factor](TensorNode& node) {
    if (!a.requires_grad()) return;
    std::vector<double> ga(static_cast<size_t>(m * n));
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        ga[static_cast<size_t>(i * n + j)] = node.grad[static_cast<size_t>(axis == 0 ? j : i)] * factor;
    accumulate(*a.node(), ga);
  });
}

}  // namespace

Tensor sum(const Tensor& a, int axis) { return reduce_axis("sum_axis", a, axis, false); }
Tensor mean(const Tensor& a, int axis) { return reduce_axis("mean_axis", a, axis, true); }

Tensor squared_error(const Tensor& a, const Tensor& b) {
  if (!same_shape(a, b)) throw ShapeError("squared_error", a.shape(), b.shape());
  const auto av = a.values();
  const auto bv = b.values();
  double acc = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    double d = av[i] - bv[i];
    acc += d * d;
  }
  return record("squared_error", {}, {acc}, {a, b}, [a, b](TensorNode& node) {
    double g = node.grad[0];
    const auto av2 = a.values();
    const auto bv2 = b.values();
    if (a.requires_grad()) {
      std::vector<double> ga(av2.size());
      for (size_t i = 0; i < av2.size(); ++i) ga[i] = 2.0 * g * (av2[i] - bv2[i]);
      accumulate(*a.node(), ga);
    }
    if (b.requires_grad()) {
      std::vector<double> gb(bv2.size());
      for (size_t i = 0; i < bv2.size(); ++i) gb[i] = -2.0 * g * (av2[i] - bv2[i]);
      accumulate(*b.node(), gb);
    }
  });
}

// ---- structure -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ValueError("concat: no inputs");
  const int nd = parts[0].ndim();
  if (axis < 0 || axis >= nd) throw ValueError("concat: axis out of range");
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw ShapeError("concat", parts[0].shape(), p.shape());
    for (int d = 0; d < nd; ++d)
      if (d != axis && p.dim(d) != parts[0].dim(d))
        throw ShapeError("concat", parts[0].shape(), p.shape());
  }
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<size_t>(axis)] = 0;
  for (const auto& p : parts) out_shape[static_cast<size_t>(axis)] += p.dim(axis);

  // Treat each tensor as (outer, axis_extent, inner).
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= parts[0].dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= parts[0].dim(d);
  int64_t total_axis = out_shape[static_cast<size_t>(axis)];

  std::vector<double> out(static_cast<size_t>(outer * total_axis * inner));
  int64_t offset = 0;
  for (const auto& p : parts) {
    const auto pv = p.values();
    int64_t pa = p.dim(axis);
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < pa; ++i)
        std::copy_n(&pv[static_cast<size_t>((o * pa + i) * inner)], inner,
                    &out[static_cast<size_t>((o * total_axis + offset + i) * inner)]);
    offset += pa;
  }
  return record("concat", out_shape, std::move(out), parts,
                [parts, outer, inner, total_axis, axis](TensorNode& node) {
                  int64_t off = 0;
                  for (const auto& p : parts) {
                    int64_t pa = p.dim(axis);
                    if (p.requires_grad()) {
                      std::vector<double> gp(static_cast<size_t>(p.numel()));
                      for (int64_t o = 0; o < outer; ++o)
                        for (int64_t i = 0; i < pa; ++i)
                          std::copy_n(&node.grad[static_cast<size_t>((o * total_axis + off + i) * inner)],
                                      inner, &gp[static_cast<size_t>((o * pa + i) * inner)]);
                      accumulate(*p.node(), gp);
                    }
                    off += pa;
                  }
                });
}

Tensor stack(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ValueError("stack: no inputs");
  const int64_t d = rows[0].numel();
  for (const auto& r : rows)
    if (r.ndim() != 1 || r.numel() != d) throw ShapeError("stack", rows[0].shape(), r.shape());
  std::vector<double> out;
  out.reserve(static_cast<size_t>(d) * rows.size());
  for (const auto& r : rows) {
    const auto rv = r.values();
    out.insert(out.end(), rv.begin(), rv.end());
  }
  return record("stack", {static_cast<int64_t>(rows.size()), d}, std::move(out), rows,
                [rows, d](TensorNode& node) {
                  for (size_t r = 0; r < rows.size(); ++r) {
                    if (!rows[r].requires_grad()) continue;
                    std::vector<double> gr(node.grad.begin() + static_cast<int64_t>(r) * d,
                                           node.grad.begin() + static_cast<int64_t>(r + 1) * d);
                    accumulate(*rows[r].node(), gr);
                  }
                });
}

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t stop) {
  const int nd = a.ndim();
  if (axis < 0 || axis >= nd) throw ValueError("slice: axis out of range");
  if (start < 0 || stop > a.dim(axis) || start >= stop)
    throw ValueError("slice: range [" + std::to_string(start) + "," + std::to_string(stop) +
                     ") invalid for extent " + std::to_string(a.dim(axis)));
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= a.dim(d);
  int64_t ax = a.dim(axis), n = stop - start;
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = n;
  const auto av = a.values();
  std::vector<double> out(static_cast<size_t>(outer * n * inner));
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t i = 0; i < n; ++i)
      std::copy_n(&av[static_cast<size_t>((o * ax + start + i) * inner)], inner,
                  &out[static_cast<size_t>((o * n + i) * inner)]);
  return record("slice", out_shape, std::move(out), {a},
                [a, outer, inner, ax, n, start](TensorNode& node) {
                  if (!a.requires_grad()) return;
                  std::vector<double> ga(static_cast<size_t>(a.numel()), 0.0);
                  for (int64_t o = 0; o < outer; ++o)
                    for (int64_t i = 0; i < n; ++i)
                      std::copy_n(&node.grad[static_cast<size_t>((o * n + i) * inner)], inner,
                                  &ga[static_cast<size_t>((o * ax + start + i) * inner)]);
                  accumulate(*a.node(), ga);
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) throw ShapeError("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return record("reshape", std::move(shape), std::move(out), {a}, [a](TensorNode& node) {
    if (!a.requires_grad()) return;
    accumulate(*a.node(), node.grad);
  });
}

// ---- autodiff --------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ValueError("backward: undefined tensor");
  if (loss.numel() != 1) throw ValueError("backward: loss must be scalar");

  // Topological order via iterative post-order DFS over parents.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next].get();
      ++next;
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Gradients of recorded (non-leaf) nodes are per-sweep scratch; only leaf
  // gradients accumulate across backward calls.
  for (TensorNode* node : order)
    if (node->backward_fn) node->grad.assign(node->data.size(), 0.0);

  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor probe = x.detach();
  probe.set_requires_grad(true);
  Tensor y = f(probe);
  if (y.numel() != 1) throw ValueError("grad_check: f must be scalar-valued");
  backward(y);
  std::vector<double> analytic(probe.grad().begin(), probe.grad().end());

  double worst = 0.0;
  Tensor work = x.detach();
  auto vals = work.raw_values();
  for (size_t i = 0; i < vals.size(); ++i) {
    double keep = vals[i];
    vals[i] = keep + eps;
    double up = f(work).value();
    vals[i] = keep - eps;
    double down = f(work).value();
    vals[i] = keep;
    double numeric = (up - down) / (2.0 * eps);
    double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace plants
