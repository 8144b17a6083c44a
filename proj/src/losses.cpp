#include "plants/losses.hpp"

#include <algorithm>
#include <cmath>

namespace plants {

std::vector<double> soft_targets(std::span<const double> sim_row) {
  if (sim_row.empty()) throw ValueError("soft_targets: empty similarity row");
  double mx = -HUGE_VAL;
  for (double s : sim_row) {
    if (!std::isfinite(s)) throw DomainError("soft_targets: non-finite similarity");
    mx = std::max(mx, s);
  }
  std::vector<double> p(sim_row.size());
  double denom = 0.0;
  for (size_t j = 0; j < sim_row.size(); ++j) {
    p[j] = std::exp(sim_row[j] - mx);
    denom += p[j];
  }
  for (auto& v : p) v /= denom;
  return p;
}

std::vector<double> predicted_distribution(std::span<const double> logits_excl) {
  return soft_targets(logits_excl);
}

namespace {

// Row i of the similarity matrix with the diagonal removed, / temperature.
std::vector<double> sim_row_excluding(const SimilarityMatrix& sims, int64_t i,
                                      const std::vector<int64_t>& cols, double temperature) {
  std::vector<double> row;
  row.reserve(cols.size() - 1);
  for (int64_t j : cols)
    if (j != i) row.push_back(sims.at(i, j) / temperature);
  return row;
}

// logits[i, cols != i] as a 1-D graph tensor.
Tensor logits_row_excluding(const Tensor& logits, int64_t i, const std::vector<int64_t>& cols) {
  Tensor row = reshape(slice(logits, 0, i, i + 1), {logits.dim(1)});
  // cols is sorted; gather contiguous runs around the excluded index.
  std::vector<Tensor> parts;
  int64_t run_start = -1, prev = -2;
  auto flush = [&](int64_t end_excl) {
    if (run_start >= 0) parts.push_back(slice(row, 0, run_start, end_excl));
    run_start = -1;
  };
  for (int64_t j : cols) {
    if (j == i) continue;
    if (j != prev + 1) {
      flush(prev + 1);
      run_start = j;
    }
    prev = j;
  }
  flush(prev + 1);
  if (parts.size() == 1) return parts[0];
  return concat(parts, 0);
}

Tensor contrastive_mean(const Tensor& u_windows, const SimilarityMatrix& sims,
                        const std::vector<int64_t>& active, const ContrastiveOptions& opts,
                        const char* what) {
  Tensor logits = matmul(u_windows, transpose(u_windows));
  if (opts.temperature != 1.0) logits = scale(logits, 1.0 / opts.temperature);
  std::vector<Tensor> terms;
  terms.reserve(active.size());
  for (int64_t i : active) {
    auto p = soft_targets(sim_row_excluding(sims, i, active, opts.temperature));
    Tensor log_q = log_softmax(logits_row_excluding(logits, i, active), 0);
    const int64_t width = static_cast<int64_t>(p.size());
    Tensor target = Tensor::from_vector({width}, std::move(p));
    terms.push_back(reshape(neg(dot(log_q, target)), {1}));
  }
  if (terms.empty()) throw ValueError(std::string(what) + ": no anchors");
  return mean(concat(terms, 0));
}

}  // namespace

Tensor local_contrastive(const Tensor& u_windows, const SimilarityMatrix& sims,
                         const ContrastiveOptions& opts) {
  if (u_windows.ndim() != 2) throw ValueError("local_contrastive: expected (B, D) embeddings");
  const int64_t b = u_windows.dim(0);
  if (b < 2) throw ValueError("local_contrastive: batch must have B >= 2");
  if (sims.extent != b) throw ShapeError("local_contrastive", {sims.extent}, {b});
  std::vector<int64_t> all(static_cast<size_t>(b));
  for (int64_t i = 0; i < b; ++i) all[static_cast<size_t>(i)] = i;
  return contrastive_mean(u_windows, sims, all, opts, "local_contrastive");
}

std::optional<Tensor> global_contrastive(const Tensor& u_windows, const SimilarityMatrix& sims,
                                         const ContrastiveOptions& opts) {
  if (u_windows.ndim() != 2) throw ValueError("global_contrastive: expected (M, D) embeddings");
  if (sims.extent != u_windows.dim(0))
    throw ShapeError("global_contrastive", {sims.extent}, {u_windows.dim(0)});
  std::vector<int64_t> active;
  for (int64_t m = 0; m < sims.extent; ++m)
    if (sims.usable.empty() || sims.usable[static_cast<size_t>(m)]) active.push_back(m);
  if (active.size() < 2) return std::nullopt;  // skipped, not an error
  return contrastive_mean(u_windows, sims, active, opts, "global_contrastive");
}

std::optional<Tensor> granularity_contrastive(double alpha, const std::optional<Tensor>& local_mean,
                                              const std::optional<Tensor>& global_mean) {
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("granularity_contrastive: alpha outside [0,1]");
  if (local_mean && global_mean)
    return add(scale(*local_mean, alpha), scale(*global_mean, 1.0 - alpha));
  if (local_mean) return alpha > 0.0 ? local_mean : std::nullopt;
  if (global_mean) return alpha < 1.0 ? global_mean : std::nullopt;
  return std::nullopt;
}

std::optional<Tensor> ntp_loss(const std::vector<std::vector<Tensor>>& u,
                               const std::vector<std::vector<Tensor>>& v,
                               const std::vector<char>& usable, const PredictionHead& head,
                               bool stop_gradient) {
  if (u.size() != v.size()) throw ValueError("ntp_loss: u and v instance counts differ");
  std::vector<int64_t> pairs;
  const int64_t m_count = static_cast<int64_t>(usable.size());
  for (int64_t m = 0; m + 1 < m_count; ++m)
    if (usable[static_cast<size_t>(m)] && usable[static_cast<size_t>(m + 1)]) pairs.push_back(m);
  if (pairs.empty() || u.empty()) return std::nullopt;

  std::vector<Tensor> inputs, targets;
  inputs.reserve(u.size() * pairs.size());
  targets.reserve(u.size() * pairs.size());
  for (size_t i = 0; i < u.size(); ++i) {
    if (static_cast<int64_t>(u[i].size()) != m_count || static_cast<int64_t>(v[i].size()) != m_count)
      throw ValueError("ntp_loss: window count mismatch");
    for (int64_t m : pairs) {
      inputs.push_back(concat({u[i][static_cast<size_t>(m)], v[i][static_cast<size_t>(m)]}, 0));
      Tensor target = v[i][static_cast<size_t>(m + 1)];
      targets.push_back(stop_gradient ? target.detach() : target);
    }
  }
  Tensor pred = head.forward(stack(inputs));
  Tensor diff = squared_error(pred, stack(targets));
  return scale(diff, 1.0 / static_cast<double>(inputs.size()));
}

Tensor total_loss(double lambda, const std::vector<std::optional<Tensor>>& contrastive,
                  const std::vector<std::optional<Tensor>>& ntp) {
  if (lambda < 0.0 || lambda > 1.0) throw ValueError("total_loss: lambda outside [0,1]");
  if (contrastive.size() != ntp.size()) throw ValueError("total_loss: granularity count mismatch");
  std::vector<Tensor> terms;
  for (size_t k = 0; k < contrastive.size(); ++k) {
    const auto& lc = contrastive[k];
    const auto& lt = ntp[k];
    if (lc && lt)
      terms.push_back(add(scale(*lc, lambda), scale(*lt, 1.0 - lambda)));
    else if (lc && lambda > 0.0)
      terms.push_back(*lc);
    else if (lt && lambda < 1.0)
      terms.push_back(*lt);
  }
  if (terms.empty()) throw ValueError("total_loss: no contributing terms");
  std::vector<Tensor> rows;
  rows.reserve(terms.size());
  for (auto& t : terms) rows.push_back(reshape(t, {1}));
  return mean(concat(rows, 0));
}

KlParts kl_identity(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty())
    throw ValueError("kl_identity: distributions must be non-empty and equal-length");
  auto clamp = [](double x) { return std::max(x, 1e-12); };
  KlParts parts;
  for (size_t j = 0; j < p.size(); ++j) {
    double pj = clamp(p[j]), qj = clamp(q[j]);
    parts.cross_entropy -= p[j] * std::log(qj);
    parts.kl += p[j] * std::log(pj / qj);
    parts.entropy -= p[j] * std::log(pj);
  }
  return parts;
}

}  // namespace plants
