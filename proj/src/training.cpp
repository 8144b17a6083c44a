#include "plants/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "plants/checkpoint.hpp"
#include "plants/losses.hpp"
#include "plants/patching.hpp"
#include "plants/similarity.hpp"

namespace plants {

// ---- standardization -------------------------------------------------------

Standardizer Standardizer::fit(const TimeSeriesDataset& ds) {
  ds.validate();
  if (ds.n == 0) throw ValueError("standardize: empty dataset");
  Standardizer st;
  st.mean.assign(static_cast<size_t>(ds.c), 0.0);
  st.stddev.assign(static_cast<size_t>(ds.c), 0.0);
  const double count = static_cast<double>(ds.n * ds.l);
  for (int64_t i = 0; i < ds.n; ++i)
    for (int64_t t = 0; t < ds.l; ++t)
      for (int64_t ch = 0; ch < ds.c; ++ch) st.mean[static_cast<size_t>(ch)] += ds.at(i, t, ch);
  for (auto& m : st.mean) m /= count;
  for (int64_t i = 0; i < ds.n; ++i)
    for (int64_t t = 0; t < ds.l; ++t)
      for (int64_t ch = 0; ch < ds.c; ++ch) {
        double d = ds.at(i, t, ch) - st.mean[static_cast<size_t>(ch)];
        st.stddev[static_cast<size_t>(ch)] += d * d;
      }
  for (auto& s : st.stddev) {
    s = std::sqrt(s / count);
    if (s < 1e-12) s = 1.0;  // constant channel: clamp
  }
  return st;
}

void Standardizer::apply(TimeSeriesDataset& ds) const {
  if (static_cast<int64_t>(mean.size()) != ds.c)
    throw ValueError("standardize: channel count mismatch");
  for (int64_t i = 0; i < ds.n; ++i)
    for (int64_t t = 0; t < ds.l; ++t)
      for (int64_t ch = 0; ch < ds.c; ++ch)
        ds.at(i, t, ch) = (ds.at(i, t, ch) - mean[static_cast<size_t>(ch)]) / stddev[static_cast<size_t>(ch)];
}

void Standardizer::invert(TimeSeriesDataset& ds) const {
  if (static_cast<int64_t>(mean.size()) != ds.c)
    throw ValueError("destandardize: channel count mismatch");
  for (int64_t i = 0; i < ds.n; ++i)
    for (int64_t t = 0; t < ds.l; ++t)
      for (int64_t ch = 0; ch < ds.c; ++ch)
        ds.at(i, t, ch) = ds.at(i, t, ch) * stddev[static_cast<size_t>(ch)] + mean[static_cast<size_t>(ch)];
}

TimeSeriesDataset Standardizer::applied(const TimeSeriesDataset& ds) const {
  TimeSeriesDataset out = ds;
  apply(out);
  return out;
}

// ---- config ----------------------------------------------------------------

void TrainingConfig::validate() const {
  if (batch_size < 2) throw ValueError("config: batch_size must be >= 2 (Eq. 3 needs a negative)");
  if (alpha < 0.0 || alpha > 1.0) throw ValueError("config: alpha outside [0,1]");
  if (lambda < 0.0 || lambda > 1.0) throw ValueError("config: lambda outside [0,1]");
  if (lr <= 0.0) throw ValueError("config: learning rate must be positive");
  if (epochs < 1) throw ValueError("config: epochs must be >= 1");
  if (temperature <= 0.0) throw ValueError("config: temperature must be positive");
  if (windows.empty() && k < 1)
    throw ValueError("config: set exactly one of k or explicit windows");
  if (!windows.empty() && explicit_windows == false)
    throw ValueError("config: windows present but not flagged explicit");
  if (explicit_windows && windows.empty())
    throw ValueError("config: explicit windows flagged but empty");
  if (threads < 1) throw ValueError("config: threads must be >= 1");
}

// ---- Adam ------------------------------------------------------------------

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, int64_t t, double lr, double beta1, double beta2,
                 double eps) {
  if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
    throw ShapeError("adam_update", {static_cast<int64_t>(param.size())},
                     {static_cast<int64_t>(grad.size())});
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < param.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  for (size_t i = 0; i < params_.size(); ++i)
    adam_update(params_[i].raw_values(), params_[i].grad(), m_[i], v_[i], t_, lr_, beta1_, beta2_,
                eps_);
}

void AdamOptimizer::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

// ---- training loop ---------------------------------------------------------

namespace {

Tensor series_tensor(const TimeSeriesDataset& ds, int64_t i) {
  auto s = ds.series(i);
  return Tensor::from_vector({ds.l, ds.c}, std::vector<double>(s.begin(), s.end()));
}

Tensor maybe_normalize(Tensor u, bool normalize) {
  if (!normalize) return u;
  Tensor norm = sqrt(add(dot(u, u), Tensor::scalar(1e-12)));
  return div(u, norm);
}

struct GranularityStructure {
  int window = 0;
  int64_t count = 0;
  std::vector<char> usable;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

RunArtifacts train(const TrainingConfig& config, const TimeSeriesDataset& dataset,
                   const std::string& out_dir) {
  config.validate();
  dataset.validate();
  if (dataset.n < 2) throw ValueError("train: need at least 2 instances");
  if (!dataset.finite()) throw DataError("train: non-finite input values");
  std::filesystem::create_directories(out_dir);

  RunArtifacts artifacts;
  artifacts.config = config;

  // Preprocessing and Eq. 1, once over the training split.
  Standardizer standardizer = Standardizer::fit(dataset);
  TimeSeriesDataset data = standardizer.applied(dataset);
  if (!config.windows.empty()) {
    artifacts.periods = periods_from_windows(config.windows, data.l);
  } else {
    try {
      artifacts.periods = detect_periods(data, config.k);
    } catch (const PeriodFallbackError& e) {
      throw PeriodFallbackError(std::string(e.what()) +
                                    "; aborting — rerun with explicit windows (e.g. windows=" +
                                    std::to_string(e.suggested_window) + ")",
                                e.suggested_window);
    }
  }
  const auto window_sizes = artifacts.periods.windows();
  const size_t n_gran = window_sizes.size();

  ModelConfig mc;
  mc.in_channels = static_cast<int>(data.c);
  mc.hidden = config.hidden;
  mc.depth = config.depth;
  mc.kernel = config.kernel;
  mc.d_l = config.d_l;
  mc.d_t = config.d_t;
  mc.head_hidden = config.head_hidden;
  mc.seed = config.seed;
  PlantsModel model(mc);

  // Window structure per granularity (identical across instances).
  std::vector<GranularityStructure> structure(n_gran);
  std::vector<std::vector<PatchView>> raw_views(static_cast<size_t>(data.n));
  for (int64_t i = 0; i < data.n; ++i) {
    raw_views[static_cast<size_t>(i)] =
        multi_segment(data.series(i), data.l, data.c, artifacts.periods);
  }
  for (size_t k = 0; k < n_gran; ++k) {
    const PatchView& v = raw_views[0][k];
    structure[k] = {v.window, v.count, v.usable};
  }

  // Global similarity matrices depend only on raw inputs: computed once per
  // (instance, granularity), cached for the whole run.
  std::vector<std::vector<std::optional<SimilarityMatrix>>> global_cache(
      static_cast<size_t>(data.n), std::vector<std::optional<SimilarityMatrix>>(n_gran));
  auto global_sims = [&](int64_t i, size_t k) -> const SimilarityMatrix& {
    auto& slot = global_cache[static_cast<size_t>(i)][k];
    if (!slot) {
      slot = mxcorr_global(raw_views[static_cast<size_t>(i)][k], config.threads);
      ++artifacts.global_sims_computed;
    } else {
      ++artifacts.global_sim_cache_hits;
    }
    return *slot;
  };

  AdamOptimizer optimizer(model.parameters(), config.lr);
  Rng rng(config.seed);
  std::vector<int64_t> order(static_cast<size_t>(data.n));
  for (int64_t i = 0; i < data.n; ++i) order[static_cast<size_t>(i)] = i;

  const bool use_local = config.alpha > 0.0 && config.lambda > 0.0;
  const bool use_global = config.alpha < 1.0 && config.lambda > 0.0;
  const bool use_ntp = config.lambda < 1.0;

  double best_loss = HUGE_VAL;
  int plateau = 0;
  bool first_batch = true;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    EpochRecord record;
    record.epoch = epoch;
    record.per_granularity.assign(n_gran, {});
    for (size_t k = 0; k < n_gran; ++k) record.per_granularity[k].window = structure[k].window;
    double epoch_total = 0.0;
    int64_t batches = 0;

    for (int64_t start = 0; start < data.n; start += config.batch_size) {
      int64_t b = std::min<int64_t>(config.batch_size, data.n - start);
      if (b < 2) break;  // a lone trailing instance has no negative
      std::vector<int64_t> batch(order.begin() + start, order.begin() + start + b);

      // Encode once per instance; granularities reuse the embeddings.
      std::vector<Tensor> lat, trans;
      lat.reserve(static_cast<size_t>(b));
      trans.reserve(static_cast<size_t>(b));
      for (int64_t idx : batch) {
        Tensor x = series_tensor(data, idx);
        lat.push_back(model.encode_latent(x));
        if (use_ntp) trans.push_back(model.encode_transition(x));
      }

      std::vector<std::optional<Tensor>> contrastive_terms(n_gran), ntp_terms(n_gran);
      for (size_t k = 0; k < n_gran; ++k) {
        const auto& gs = structure[k];
        std::vector<std::vector<Tensor>> u(static_cast<size_t>(b)), v(static_cast<size_t>(b));
        for (int64_t bi = 0; bi < b; ++bi) {
          u[static_cast<size_t>(bi)].reserve(static_cast<size_t>(gs.count));
          for (int64_t m = 0; m < gs.count; ++m) {
            int64_t start_row = m * gs.window;
            int64_t valid = std::min<int64_t>(gs.window, data.l - start_row);
            u[static_cast<size_t>(bi)].push_back(maybe_normalize(
                pool_rows(lat[static_cast<size_t>(bi)], start_row, valid), config.normalize_embeddings));
            if (use_ntp)
              v[static_cast<size_t>(bi)].push_back(maybe_normalize(
                  pool_rows(trans[static_cast<size_t>(bi)], start_row, valid),
                  config.normalize_embeddings));
          }
        }

        ContrastiveOptions copts;
        copts.temperature = config.temperature;

        std::optional<Tensor> local_mean;
        if (use_local) {
          std::vector<Tensor> per_window;
          std::vector<double> window_buf(static_cast<size_t>(b * gs.window * data.c));
          for (int64_t m = 0; m < gs.count; ++m) {
            if (!gs.usable[static_cast<size_t>(m)]) continue;  // padding-heavy: excluded
            for (int64_t bi = 0; bi < b; ++bi) {
              auto patch = raw_views[static_cast<size_t>(batch[static_cast<size_t>(bi)])][k].patch(m);
              std::copy(patch.begin(), patch.end(),
                        window_buf.begin() + bi * gs.window * data.c);
            }
            SimilarityMatrix sims =
                mxcorr_local(window_buf, b, gs.window, data.c, config.threads);
            std::vector<Tensor> rows;
            rows.reserve(static_cast<size_t>(b));
            for (int64_t bi = 0; bi < b; ++bi) rows.push_back(u[static_cast<size_t>(bi)][static_cast<size_t>(m)]);
            per_window.push_back(reshape(local_contrastive(stack(rows), sims, copts), {1}));
          }
          if (!per_window.empty()) local_mean = mean(concat(per_window, 0));
        }

        std::optional<Tensor> global_mean;
        if (use_global && raw_views[0][k].usable_count() >= 2) {
          std::vector<Tensor> per_instance;
          for (int64_t bi = 0; bi < b; ++bi) {
            int64_t idx = batch[static_cast<size_t>(bi)];
            if (raw_views[static_cast<size_t>(idx)][k].usable_count() < 2) continue;
            auto g = global_contrastive(stack(u[static_cast<size_t>(bi)]), global_sims(idx, k), copts);
            if (g) per_instance.push_back(reshape(*g, {1}));
          }
          if (!per_instance.empty()) global_mean = mean(concat(per_instance, 0));
        }

        contrastive_terms[k] = granularity_contrastive(config.alpha, local_mean, global_mean);
        if (use_ntp)
          ntp_terms[k] = ntp_loss(u, v, gs.usable, model.head(), config.ntp_stop_gradient);

        auto& gl = record.per_granularity[k];
        gl.local_skipped = !use_local;
        gl.global_skipped = !use_global || !global_mean.has_value();
        gl.ntp_skipped = !use_ntp || !ntp_terms[k].has_value();
        if (local_mean) gl.local += local_mean->value();
        if (global_mean) gl.global += global_mean->value();
        if (ntp_terms[k]) gl.ntp += ntp_terms[k]->value();
        if (contrastive_terms[k] || ntp_terms[k]) {
          double blended = 0.0;
          if (contrastive_terms[k] && ntp_terms[k])
            blended = config.lambda * contrastive_terms[k]->value() +
                      (1.0 - config.lambda) * ntp_terms[k]->value();
          else if (contrastive_terms[k])
            blended = contrastive_terms[k]->value();
          else
            blended = ntp_terms[k]->value();
          gl.blended += blended;
        }
      }

      Tensor loss = total_loss(config.lambda, contrastive_terms, ntp_terms);
      double loss_value = loss.value();
      if (!std::isfinite(loss_value))
        throw DomainError("train: non-finite loss at epoch " + std::to_string(epoch));
      if (first_batch) {
        artifacts.first_batch_loss = loss_value;
        first_batch = false;
      }
      backward(loss);
      optimizer.step();
      optimizer.zero_grads();
      epoch_total += loss_value;
      ++batches;
    }

    if (batches == 0) throw ValueError("train: no batch with at least 2 instances");
    for (size_t k = 0; k < n_gran; ++k) {
      auto& gl = record.per_granularity[k];
      double denom = static_cast<double>(std::max<int64_t>(1, batches));
      gl.local /= denom;
      gl.global /= denom;
      gl.ntp /= denom;
      gl.blended /= denom;
    }
    record.total = epoch_total / static_cast<double>(batches);
    artifacts.epochs.push_back(record);
    artifacts.epochs_run = epoch;
    artifacts.final_loss = record.total;

    // Plateau detection: stop after 10 epochs without relative improvement.
    if (config.early_stop) {
      if (epoch == 1 || record.total < best_loss - 1e-4 * std::max(std::abs(best_loss), 1e-12)) {
        best_loss = record.total;
        plateau = 0;
      } else if (++plateau >= 10) {
        break;
      }
    }
  }

  // ---- artifacts -----------------------------------------------------------
  artifacts.checkpoint_path = out_dir + "/model.plants";
  artifacts.loss_log_path = out_dir + "/loss_log.csv";
  artifacts.manifest_path = out_dir + "/manifest.txt";
  save_checkpoint(artifacts.checkpoint_path, model, standardizer);

  {
    std::ofstream os(artifacts.loss_log_path);
    if (!os) throw DataError("cannot write " + artifacts.loss_log_path);
    os << "epoch,window,local,global,ntp,blended,total\n";
    for (const auto& rec : artifacts.epochs) {
      for (const auto& gl : rec.per_granularity) {
        os << rec.epoch << "," << gl.window << ","
           << (gl.local_skipped ? "skipped" : fmt(gl.local)) << ","
           << (gl.global_skipped ? "skipped" : fmt(gl.global)) << ","
           << (gl.ntp_skipped ? "skipped" : fmt(gl.ntp)) << "," << fmt(gl.blended) << ",\n";
      }
      os << rec.epoch << ",all,,,,," << fmt(rec.total) << "\n";
    }
  }

  {
    std::ofstream os(artifacts.manifest_path);
    if (!os) throw DataError("cannot write " + artifacts.manifest_path);
    os << "alpha=" << fmt(config.alpha) << "\nlambda=" << fmt(config.lambda) << "\n";
    if (config.windows.empty()) {
      os << "k=" << config.k << "\n";
    } else {
      os << "windows=";
      for (size_t i = 0; i < config.windows.size(); ++i)
        os << (i ? "," : "") << config.windows[i];
      os << "\n";
    }
    os << "batch_size=" << config.batch_size << "\nlr=" << fmt(config.lr)
       << "\nepochs=" << config.epochs << "\nseed=" << config.seed
       << "\nhidden=" << config.hidden << "\ndepth=" << config.depth
       << "\nkernel=" << config.kernel << "\nd_l=" << config.d_l << "\nd_t=" << config.d_t
       << "\nhead_hidden=" << config.head_hidden << "\ntemperature=" << fmt(config.temperature)
       << "\nnormalize_embeddings=" << (config.normalize_embeddings ? 1 : 0)
       << "\nntp_stop_gradient=" << (config.ntp_stop_gradient ? 1 : 0)
       << "\nearly_stop=" << (config.early_stop ? 1 : 0) << "\nthreads=" << config.threads
       << "\nn=" << dataset.n << "\nl=" << dataset.l << "\nc=" << dataset.c << "\n";
    os << "detected_windows=";
    for (size_t i = 0; i < window_sizes.size(); ++i) os << (i ? "," : "") << window_sizes[i];
    os << "\nepochs_run=" << artifacts.epochs_run << "\nfinal_loss=" << fmt(artifacts.final_loss)
       << "\ncheckpoint=" << artifacts.checkpoint_path << "\nloss_log=" << artifacts.loss_log_path
       << "\n";
  }
  return artifacts;
}

}  // namespace plants
