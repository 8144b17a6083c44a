#pragma once

#include <optional>
#include <span>
#include <vector>

#include "plants/model.hpp"
#include "plants/similarity.hpp"
#include "plants/tensor.hpp"

namespace plants {

// Numerically stable softmax of a similarity row. Plain data: targets carry
// no gradient by construction.
std::vector<double> soft_targets(std::span<const double> sim_row);

struct ContrastiveOptions {
  double temperature = 1.0;  // divides both the similarity row and the logits
};

// Local instance-wise soft contrastive loss at one window: mean over anchors
// i of -sum_{j != i} p(i,j) log q(i,j), with P from the similarity row and Q
// from pooled-embedding dot products. u_windows is (B, D). B >= 2.
Tensor local_contrastive(const Tensor& u_windows, const SimilarityMatrix& sims,
                         const ContrastiveOptions& opts = {});

// Global state-wise mirror over the windows of one instance; u_windows is
// (M, D). Windows flagged unusable are excluded as anchors and negatives.
// Returns nullopt when fewer than 2 usable windows remain (term skipped).
std::optional<Tensor> global_contrastive(const Tensor& u_windows, const SimilarityMatrix& sims,
                                         const ContrastiveOptions& opts = {});

// Alpha-blend of the two contrastive means. A missing side hands its weight
// to the present one (renormalization); nullopt when nothing contributes.
std::optional<Tensor> granularity_contrastive(double alpha, const std::optional<Tensor>& local_mean,
                                              const std::optional<Tensor>& global_mean);

// Next-transition prediction: mean over instances and consecutive usable
// window pairs (m, m+1) of |G(concat(u^m, v^m)) - v^{m+1}|^2. u and v are
// indexed [instance][window]. Returns nullopt when no usable pair exists.
std::optional<Tensor> ntp_loss(const std::vector<std::vector<Tensor>>& u,
                               const std::vector<std::vector<Tensor>>& v,
                               const std::vector<char>& usable, const PredictionHead& head,
                               bool stop_gradient = false);

// Final objective: mean over granularities of lambda * L_l + (1-lambda) * L_t,
// renormalized per granularity when one term is absent.
Tensor total_loss(double lambda, const std::vector<std::optional<Tensor>>& contrastive,
                  const std::vector<std::optional<Tensor>>& ntp);

struct KlParts {
  double cross_entropy = 0.0;  // H(P, Q)
  double kl = 0.0;             // sum p log(p/q)
  double entropy = 0.0;        // H(P)
};

// Decomposition H(P,Q) = KL(P||Q) + H(P); probabilities are clamped at 1e-12
// before the logs.
KlParts kl_identity(std::span<const double> p, std::span<const double> q);

// Q row for anchor i from a logits row with entry i removed; mirrors the
// softmax inside the contrastive losses. Exposed for the identity checks.
std::vector<double> predicted_distribution(std::span<const double> logits_excl);

}  // namespace plants
