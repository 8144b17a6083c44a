#include "plants/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "plants/patching.hpp"
#include "plants/periodicity.hpp"
#include "plants/similarity.hpp"

namespace plants {

// ---- synthetic data --------------------------------------------------------

void HmmSpec::validate() const {
  if (states < 1) throw ValueError("hmm spec: need at least one state");
  if (static_cast<int64_t>(transition.size()) != static_cast<int64_t>(states) * states)
    throw ValueError("hmm spec: transition matrix must be S x S");
  for (int s = 0; s < states; ++s) {
    double row = 0.0;
    for (int t = 0; t < states; ++t) {
      double p = transition[static_cast<size_t>(s * states + t)];
      if (p < 0.0) throw ValueError("hmm spec: negative transition probability");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9)
      throw ValueError("hmm spec: transition row " + std::to_string(s) + " sums to " +
                       std::to_string(row));
  }
  if (static_cast<int>(regimes.size()) != states)
    throw ValueError("hmm spec: one emission regime per state required");
  for (const auto& r : regimes) {
    if (r.kind == EmissionRegime::Kind::Sinusoid) {
      if (r.period < 2.0) throw ValueError("hmm spec: sinusoid period must be >= 2 samples");
    } else {
      // AR(2) stationarity triangle.
      if (!(std::abs(r.phi2) < 1.0 && r.phi2 + r.phi1 < 1.0 && r.phi2 - r.phi1 < 1.0))
        throw ValueError("hmm spec: AR(2) coefficients outside the stationarity region");
    }
    if (r.noise < 0.0) throw ValueError("hmm spec: negative noise level");
  }
  if (dwell < 1) throw ValueError("hmm spec: dwell must be >= 1");
}

namespace {

HmmSpec sinusoid_preset(int states, int dwell, double noise) {
  HmmSpec spec;
  spec.states = states;
  spec.dwell = dwell;
  spec.regimes.resize(static_cast<size_t>(states));
  // Distinct period/amplitude per state keeps regimes separable.
  for (int s = 0; s < states; ++s) {
    auto& r = spec.regimes[static_cast<size_t>(s)];
    r.kind = EmissionRegime::Kind::Sinusoid;
    r.period = 8.0 + 12.0 * s;
    r.amplitude = 0.6 + 0.7 * s;
    r.noise = noise;
  }
  return spec;
}

}  // namespace

HmmSpec HmmSpec::cyclic(int states, int dwell, double noise) {
  HmmSpec spec = sinusoid_preset(states, dwell, noise);
  spec.transition.assign(static_cast<size_t>(states) * states, 0.0);
  for (int s = 0; s < states; ++s)
    spec.transition[static_cast<size_t>(s * states + (s + 1) % states)] = 1.0;
  spec.validate();
  return spec;
}

HmmSpec HmmSpec::uniform(int states, int dwell, double noise) {
  HmmSpec spec = sinusoid_preset(states, dwell, noise);
  spec.transition.assign(static_cast<size_t>(states) * states,
                         1.0 / static_cast<double>(states));
  spec.validate();
  return spec;
}

HmmSpec HmmSpec::identity(int states, int dwell, double noise) {
  HmmSpec spec = sinusoid_preset(states, dwell, noise);
  spec.transition.assign(static_cast<size_t>(states) * states, 0.0);
  for (int s = 0; s < states; ++s) spec.transition[static_cast<size_t>(s * states + s)] = 1.0;
  spec.validate();
  return spec;
}

TimeSeriesDataset gen_hmm_mts(const HmmSpec& spec, int64_t n, int64_t l, int64_t c, uint64_t seed) {
  spec.validate();
  if (n < 1 || l < 1 || c < 1) throw ValueError("gen_hmm_mts: empty extents");
  TimeSeriesDataset ds;
  ds.n = n;
  ds.l = l;
  ds.c = c;
  ds.values.resize(static_cast<size_t>(n * l * c));
  ds.step_labels.resize(static_cast<size_t>(n * l));
  Rng rng(seed);

  auto sample_next = [&](int state) {
    double r = rng.uniform();
    double acc = 0.0;
    for (int t = 0; t < spec.states; ++t) {
      acc += spec.transition[static_cast<size_t>(state * spec.states + t)];
      if (r < acc) return t;
    }
    return spec.states - 1;
  };

  std::vector<double> prev1(static_cast<size_t>(c), 0.0), prev2(static_cast<size_t>(c), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    int state = static_cast<int>(rng.uniform_int(spec.states));
    std::fill(prev1.begin(), prev1.end(), 0.0);
    std::fill(prev2.begin(), prev2.end(), 0.0);
    for (int64_t t = 0; t < l; ++t) {
      if (t > 0 && t % spec.dwell == 0) state = sample_next(state);
      ds.step_labels[static_cast<size_t>(i * l + t)] = state;
      const auto& reg = spec.regimes[static_cast<size_t>(state)];
      for (int64_t ch = 0; ch < c; ++ch) {
        double value;
        if (reg.kind == EmissionRegime::Kind::Sinusoid) {
          double phase = 2.0 * M_PI * static_cast<double>(ch) / static_cast<double>(c);
          value = reg.amplitude *
                      std::sin(2.0 * M_PI * static_cast<double>(t) / reg.period + phase) +
                  rng.normal(0.0, reg.noise);
        } else {
          value = reg.phi1 * prev1[static_cast<size_t>(ch)] +
                  reg.phi2 * prev2[static_cast<size_t>(ch)] + rng.normal(0.0, reg.noise);
        }
        prev2[static_cast<size_t>(ch)] = prev1[static_cast<size_t>(ch)];
        prev1[static_cast<size_t>(ch)] = value;
        ds.at(i, t, ch) = value;
      }
    }
  }
  return ds;
}

// ---- representations -------------------------------------------------------

TimeSeriesDataset encode_dataset(const PlantsModel& model, const Standardizer& standardizer,
                                 const TimeSeriesDataset& dataset) {
  dataset.validate();
  if (dataset.c != model.config().in_channels)
    throw DataError("encode: dataset has " + std::to_string(dataset.c) +
                    " channels, checkpoint expects " + std::to_string(model.config().in_channels));
  if (!dataset.finite()) throw DataError("encode: non-finite input values");
  TimeSeriesDataset std_ds = standardizer.applied(dataset);

  TimeSeriesDataset reps;
  reps.n = dataset.n;
  reps.l = dataset.l;
  reps.c = model.config().fused_dim();
  reps.values.resize(static_cast<size_t>(reps.n * reps.l * reps.c));
  reps.instance_block.resize(static_cast<size_t>(reps.n * reps.c));
  reps.step_labels = dataset.step_labels;
  reps.instance_labels = dataset.instance_labels;

  NoGradGuard guard;
  for (int64_t i = 0; i < dataset.n; ++i) {
    auto s = std_ds.series(i);
    Tensor x = Tensor::from_vector({dataset.l, dataset.c}, {s.begin(), s.end()});
    Tensor z = model.encode_full(x);
    auto zv = z.values();
    std::copy(zv.begin(), zv.end(), reps.values.begin() + i * reps.l * reps.c);
    auto inst = max_pool_over_time(z);
    std::copy(inst.begin(), inst.end(), reps.instance_block.begin() + i * reps.c);
  }
  return reps;
}

WindowReps window_representations(const PlantsModel& model, const Standardizer& standardizer,
                                  const TimeSeriesDataset& dataset, int window,
                                  bool require_labels) {
  dataset.validate();
  if (require_labels && !dataset.has_step_labels())
    throw ValueError("window_representations: dataset has no per-timestep labels");
  if (window < 1) throw ValueError("window_representations: window must be >= 1");
  TimeSeriesDataset std_ds = standardizer.applied(dataset);

  WindowReps out;
  const int64_t d = model.config().fused_dim();
  NoGradGuard guard;
  for (int64_t i = 0; i < dataset.n; ++i) {
    auto s = std_ds.series(i);
    Tensor z = model.encode_full(Tensor::from_vector({dataset.l, dataset.c}, {s.begin(), s.end()}));
    PatchView view = segment(dataset.series(i), dataset.l, dataset.c, window);
    if (i == 0) out.windows_per_instance = view.usable_count();
    for (int64_t m = 0; m < view.count; ++m) {
      if (!view.usable[static_cast<size_t>(m)]) continue;
      int64_t start = view.start(m), valid = view.valid_len(m);
      for (int64_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int64_t t = start; t < start + valid; ++t) acc += z.at(t, j);
        out.x.v.push_back(acc / static_cast<double>(valid));
      }
      out.instance.push_back(i);
      if (dataset.has_step_labels()) {
        std::map<int32_t, int> votes;
        for (int64_t t = start; t < start + valid; ++t)
          ++votes[dataset.step_labels[static_cast<size_t>(i * dataset.l + t)]];
        int32_t best = votes.begin()->first;
        for (const auto& [label, count] : votes)
          if (count > votes[best]) best = label;
        out.y.push_back(best);
      }
    }
  }
  out.x.cols = d;
  out.x.rows = static_cast<int64_t>(out.x.v.size()) / d;
  return out;
}

// ---- probes ----------------------------------------------------------------

namespace {

struct FeatureScaler {
  std::vector<double> mean, stddev;
  static FeatureScaler fit(const Matrix& x) {
    FeatureScaler fs;
    fs.mean.assign(static_cast<size_t>(x.cols), 0.0);
    fs.stddev.assign(static_cast<size_t>(x.cols), 0.0);
    for (int64_t i = 0; i < x.rows; ++i)
      for (int64_t j = 0; j < x.cols; ++j) fs.mean[static_cast<size_t>(j)] += x.at(i, j);
    for (auto& m : fs.mean) m /= static_cast<double>(x.rows);
    for (int64_t i = 0; i < x.rows; ++i)
      for (int64_t j = 0; j < x.cols; ++j) {
        double d = x.at(i, j) - fs.mean[static_cast<size_t>(j)];
        fs.stddev[static_cast<size_t>(j)] += d * d;
      }
    for (auto& s : fs.stddev) {
      s = std::sqrt(s / static_cast<double>(x.rows));
      if (s < 1e-12) s = 1.0;
    }
    return fs;
  }
  Matrix apply(const Matrix& x) const {
    Matrix out = x;
    for (int64_t i = 0; i < x.rows; ++i)
      for (int64_t j = 0; j < x.cols; ++j)
        out.at(i, j) = (x.at(i, j) - mean[static_cast<size_t>(j)]) / stddev[static_cast<size_t>(j)];
    return out;
  }
};

int32_t max_label(const std::vector<int32_t>& y) {
  int32_t mx = 0;
  for (int32_t v : y) mx = std::max(mx, v);
  return mx;
}

ProbeReport linear_probe(const Matrix& train_x, const std::vector<int32_t>& train_y,
                         const Matrix& test_x, const std::vector<int32_t>& test_y, uint64_t seed) {
  const int64_t classes = max_label(train_y) + 1;
  const int64_t d = train_x.cols;
  FeatureScaler scaler = FeatureScaler::fit(train_x);
  Matrix xtr = scaler.apply(train_x), xte = scaler.apply(test_x);

  // Full-batch multinomial logistic regression, plain gradient descent.
  std::vector<double> w(static_cast<size_t>(classes * d), 0.0), b(static_cast<size_t>(classes), 0.0);
  std::vector<double> logits(static_cast<size_t>(classes));
  const int iters = 400;
  const double lr = 0.5;
  std::vector<double> gw(w.size()), gb(b.size());
  for (int it = 0; it < iters; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (int64_t i = 0; i < xtr.rows; ++i) {
      double mx = -HUGE_VAL;
      for (int64_t cl = 0; cl < classes; ++cl) {
        double z = b[static_cast<size_t>(cl)];
        for (int64_t j = 0; j < d; ++j) z += w[static_cast<size_t>(cl * d + j)] * xtr.at(i, j);
        logits[static_cast<size_t>(cl)] = z;
        mx = std::max(mx, z);
      }
      double denom = 0.0;
      for (int64_t cl = 0; cl < classes; ++cl) {
        logits[static_cast<size_t>(cl)] = std::exp(logits[static_cast<size_t>(cl)] - mx);
        denom += logits[static_cast<size_t>(cl)];
      }
      for (int64_t cl = 0; cl < classes; ++cl) {
        double p = logits[static_cast<size_t>(cl)] / denom;
        double err = p - (train_y[static_cast<size_t>(i)] == cl ? 1.0 : 0.0);
        gb[static_cast<size_t>(cl)] += err;
        for (int64_t j = 0; j < d; ++j) gw[static_cast<size_t>(cl * d + j)] += err * xtr.at(i, j);
      }
    }
    double inv = 1.0 / static_cast<double>(xtr.rows);
    for (size_t idx = 0; idx < w.size(); ++idx) w[idx] -= lr * inv * gw[idx];
    for (size_t idx = 0; idx < b.size(); ++idx) b[idx] -= lr * inv * gb[idx];
  }

  int64_t correct = 0;
  for (int64_t i = 0; i < xte.rows; ++i) {
    int64_t best = 0;
    double best_z = -HUGE_VAL;
    for (int64_t cl = 0; cl < classes; ++cl) {
      double z = b[static_cast<size_t>(cl)];
      for (int64_t j = 0; j < d; ++j) z += w[static_cast<size_t>(cl * d + j)] * xte.at(i, j);
      if (z > best_z) {
        best_z = z;
        best = cl;
      }
    }
    if (best == test_y[static_cast<size_t>(i)]) ++correct;
  }
  ProbeReport report;
  report.task = "classification/linear";
  report.accuracy = static_cast<double>(correct) / static_cast<double>(std::max<int64_t>(1, xte.rows));
  report.chance = 1.0 / static_cast<double>(classes);
  report.seed = seed;
  return report;
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - num / std::sqrt(na * nb);
}

ProbeReport knn_probe(const Matrix& train_x, const std::vector<int32_t>& train_y,
                      const Matrix& test_x, const std::vector<int32_t>& test_y, uint64_t seed) {
  const int k = 5;
  const int64_t classes = max_label(train_y) + 1;
  int64_t correct = 0;
  std::vector<std::pair<double, int32_t>> dist(static_cast<size_t>(train_x.rows));
  for (int64_t i = 0; i < test_x.rows; ++i) {
    for (int64_t j = 0; j < train_x.rows; ++j)
      dist[static_cast<size_t>(j)] = {cosine_distance(test_x.row(i), train_x.row(j)),
                                      train_y[static_cast<size_t>(j)]};
    int64_t kk = std::min<int64_t>(k, train_x.rows);
    std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
    std::vector<int> votes(static_cast<size_t>(classes), 0);
    for (int64_t j = 0; j < kk; ++j) ++votes[static_cast<size_t>(dist[static_cast<size_t>(j)].second)];
    int32_t best = 0;
    for (int32_t cl = 1; cl < classes; ++cl)
      if (votes[static_cast<size_t>(cl)] > votes[static_cast<size_t>(best)]) best = cl;
    if (best == test_y[static_cast<size_t>(i)]) ++correct;
  }
  ProbeReport report;
  report.task = "classification/knn";
  report.accuracy = static_cast<double>(correct) / static_cast<double>(std::max<int64_t>(1, test_x.rows));
  report.chance = 1.0 / static_cast<double>(classes);
  report.seed = seed;
  return report;
}

}  // namespace

ProbeReport classify_probe(const Matrix& train_x, const std::vector<int32_t>& train_y,
                           const Matrix& test_x, const std::vector<int32_t>& test_y,
                           ProbeKind kind, uint64_t seed) {
  if (train_x.rows != static_cast<int64_t>(train_y.size()) ||
      test_x.rows != static_cast<int64_t>(test_y.size()))
    throw ValueError("classify_probe: rows and labels disagree");
  if (train_x.rows < 2) throw ValueError("classify_probe: need at least 2 training rows");
  std::vector<int32_t> distinct(train_y.begin(), train_y.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw ValueError("classify_probe: training labels contain one class");
  for (int32_t v : train_y)
    if (v < 0) throw ValueError("classify_probe: negative label");
  return kind == ProbeKind::Linear ? linear_probe(train_x, train_y, test_x, test_y, seed)
                                   : knn_probe(train_x, train_y, test_x, test_y, seed);
}

// ---- forecast probe --------------------------------------------------------

namespace {

// Solves (A + ridge*I) X = B for symmetric positive semidefinite A (d x d),
// B d x m, via Cholesky.
Matrix ridge_solve(const Matrix& a, const Matrix& b, double ridge) {
  const int64_t d = a.rows;
  Matrix chol;
  chol.rows = chol.cols = d;
  chol.v.assign(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j <= i; ++j) {
      double acc = a.at(i, j) + (i == j ? ridge : 0.0);
      for (int64_t p = 0; p < j; ++p) acc -= chol.at(i, p) * chol.at(j, p);
      if (i == j) {
        if (acc <= 0.0) throw DomainError("ridge_solve: matrix not positive definite");
        chol.at(i, j) = std::sqrt(acc);
      } else {
        chol.at(i, j) = acc / chol.at(j, j);
      }
    }
  Matrix x;
  x.rows = d;
  x.cols = b.cols;
  x.v.assign(static_cast<size_t>(d * b.cols), 0.0);
  std::vector<double> y(static_cast<size_t>(d));
  for (int64_t col = 0; col < b.cols; ++col) {
    for (int64_t i = 0; i < d; ++i) {
      double acc = b.at(i, col);
      for (int64_t p = 0; p < i; ++p) acc -= chol.at(i, p) * y[static_cast<size_t>(p)];
      y[static_cast<size_t>(i)] = acc / chol.at(i, i);
    }
    for (int64_t i = d - 1; i >= 0; --i) {
      double acc = y[static_cast<size_t>(i)];
      for (int64_t p = i + 1; p < d; ++p) acc -= chol.at(p, i) * x.at(p, col);
      x.at(i, col) = acc / chol.at(i, i);
    }
  }
  return x;
}

struct RidgeModel {
  Matrix beta;  // d x m
  std::vector<double> x_mean, y_mean;
};

RidgeModel ridge_fit(const Matrix& x, const Matrix& y, double ridge) {
  RidgeModel model;
  model.x_mean.assign(static_cast<size_t>(x.cols), 0.0);
  model.y_mean.assign(static_cast<size_t>(y.cols), 0.0);
  for (int64_t i = 0; i < x.rows; ++i) {
    for (int64_t j = 0; j < x.cols; ++j) model.x_mean[static_cast<size_t>(j)] += x.at(i, j);
    for (int64_t j = 0; j < y.cols; ++j) model.y_mean[static_cast<size_t>(j)] += y.at(i, j);
  }
  for (auto& m : model.x_mean) m /= static_cast<double>(x.rows);
  for (auto& m : model.y_mean) m /= static_cast<double>(x.rows);

  Matrix xtx{x.cols, x.cols, std::vector<double>(static_cast<size_t>(x.cols * x.cols), 0.0)};
  Matrix xty{x.cols, y.cols, std::vector<double>(static_cast<size_t>(x.cols * y.cols), 0.0)};
  for (int64_t i = 0; i < x.rows; ++i) {
    for (int64_t j = 0; j < x.cols; ++j) {
      double xj = x.at(i, j) - model.x_mean[static_cast<size_t>(j)];
      for (int64_t p = j; p < x.cols; ++p)
        xtx.at(j, p) += xj * (x.at(i, p) - model.x_mean[static_cast<size_t>(p)]);
      for (int64_t q = 0; q < y.cols; ++q)
        xty.at(j, q) += xj * (y.at(i, q) - model.y_mean[static_cast<size_t>(q)]);
    }
  }
  for (int64_t j = 0; j < x.cols; ++j)
    for (int64_t p = 0; p < j; ++p) xtx.at(j, p) = xtx.at(p, j);
  model.beta = ridge_solve(xtx, xty, ridge);
  return model;
}

void ridge_predict(const RidgeModel& model, std::span<const double> x, std::vector<double>& out) {
  for (size_t q = 0; q < model.y_mean.size(); ++q) {
    double acc = model.y_mean[q];
    for (size_t j = 0; j < model.x_mean.size(); ++j)
      acc += (x[j] - model.x_mean[j]) * model.beta.at(static_cast<int64_t>(j), static_cast<int64_t>(q));
    out[q] = acc;
  }
}

}  // namespace

ForecastReport forecast_probe(const TimeSeriesDataset& representations,
                              const TimeSeriesDataset& raw, const std::vector<int>& horizons,
                              double ridge, double test_fraction, int baseline_window) {
  representations.validate();
  raw.validate();
  if (representations.n != raw.n || representations.l != raw.l)
    throw ValueError("forecast_probe: representations and raw extents disagree");
  if (horizons.empty()) throw ValueError("forecast_probe: no horizons");
  ForecastReport report;
  const int w = baseline_window;
  for (int h : horizons) {
    if (h < 1) throw ValueError("forecast_probe: horizon must be >= 1");
    if (h + w >= raw.l)
      throw ValueError("forecast_probe: horizon " + std::to_string(h) +
                       " leaves no samples at L=" + std::to_string(raw.l));
    int64_t n_test = std::max<int64_t>(1, static_cast<int64_t>(std::llround(
                                              static_cast<double>(raw.n) * test_fraction)));
    int64_t n_train = raw.n - n_test;
    if (n_train < 1) throw ValueError("forecast_probe: not enough instances for a split");

    auto gather = [&](bool reps, int64_t lo, int64_t hi, Matrix& x, Matrix& y) {
      std::vector<double> xs, ys;
      int64_t xdim = reps ? representations.c : static_cast<int64_t>(w) * raw.c;
      for (int64_t i = lo; i < hi; ++i)
        for (int64_t t = w - 1; t + h < raw.l; ++t) {
          if (reps) {
            for (int64_t j = 0; j < representations.c; ++j) xs.push_back(representations.at(i, t, j));
          } else {
            for (int64_t s = t - w + 1; s <= t; ++s)
              for (int64_t ch = 0; ch < raw.c; ++ch) xs.push_back(raw.at(i, s, ch));
          }
          for (int64_t f = 1; f <= h; ++f)
            for (int64_t ch = 0; ch < raw.c; ++ch) ys.push_back(raw.at(i, t + f, ch));
        }
      x.rows = static_cast<int64_t>(xs.size()) / xdim;
      x.cols = xdim;
      x.v = std::move(xs);
      y.rows = x.rows;
      y.cols = static_cast<int64_t>(h) * raw.c;
      y.v = std::move(ys);
    };

    HorizonMetric metric;
    metric.horizon = h;
    for (int variant = 0; variant < 2; ++variant) {
      bool reps = variant == 0;
      Matrix xtr, ytr, xte, yte;
      gather(reps, 0, n_train, xtr, ytr);
      gather(reps, n_train, raw.n, xte, yte);
      RidgeModel model = ridge_fit(xtr, ytr, ridge);
      std::vector<double> pred(static_cast<size_t>(yte.cols));
      double se = 0.0, ae = 0.0;
      for (int64_t i = 0; i < xte.rows; ++i) {
        ridge_predict(model, xte.row(i), pred);
        for (int64_t q = 0; q < yte.cols; ++q) {
          double d = pred[static_cast<size_t>(q)] - yte.at(i, q);
          se += d * d;
          ae += std::abs(d);
        }
      }
      double count = static_cast<double>(xte.rows * yte.cols);
      if (reps) {
        metric.mse = se / count;
        metric.mae = ae / count;
      } else {
        metric.baseline_mse = se / count;
        metric.baseline_mae = ae / count;
      }
    }
    report.horizons.push_back(metric);
  }
  return report;
}

// ---- anomaly scoring -------------------------------------------------------

double anomaly_score(const PlantsModel& model, const Standardizer& standardizer,
                     std::span<const double> series, int64_t l, int64_t c, int64_t t) {
  if (t < 0 || t >= l) throw ValueError("anomaly_score: t outside the series");
  if (static_cast<int64_t>(series.size()) != l * c)
    throw ValueError("anomaly_score: series size does not match L*C");

  // Standardize one instance with the checkpointed record.
  std::vector<double> std_series(series.begin(), series.end());
  for (int64_t tt = 0; tt < l; ++tt)
    for (int64_t ch = 0; ch < c; ++ch) {
      double& v = std_series[static_cast<size_t>(tt * c + ch)];
      v = (v - standardizer.mean[static_cast<size_t>(ch)]) / standardizer.stddev[static_cast<size_t>(ch)];
    }
  std::vector<double> masked = std_series;
  for (int64_t ch = 0; ch < c; ++ch) masked[static_cast<size_t>(t * c + ch)] = 0.0;

  NoGradGuard guard;
  Tensor z_full = model.encode_full(Tensor::from_vector({l, c}, std::move(std_series)));
  Tensor z_masked = model.encode_full(Tensor::from_vector({l, c}, std::move(masked)));
  const int64_t d = z_full.dim(1);
  double score = 0.0;
  for (int64_t j = 0; j < d; ++j) score += std::abs(z_full.at(t, j) - z_masked.at(t, j));
  return score;
}

std::vector<double> anomaly_scores(const PlantsModel& model, const Standardizer& standardizer,
                                   std::span<const double> series, int64_t l, int64_t c) {
  std::vector<double> out(static_cast<size_t>(l));
  for (int64_t t = 0; t < l; ++t) out[static_cast<size_t>(t)] = anomaly_score(model, standardizer, series, l, c, t);
  return out;
}

double auroc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  if (positives.empty() || negatives.empty()) throw ValueError("auroc: empty score set");
  // Mann-Whitney with tie correction.
  double greater = 0.0;
  for (double p : positives)
    for (double n : negatives) {
      if (p > n)
        greater += 1.0;
      else if (p == n)
        greater += 0.5;
    }
  return greater / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

// ---- misc ------------------------------------------------------------------

std::vector<double> difference(std::span<const double> series, int64_t l, int64_t c, int d) {
  if (d < 0) throw ValueError("difference: d must be >= 0");
  if (d >= l) throw ValueError("difference: d >= series length");
  std::vector<double> cur(series.begin(), series.end());
  int64_t len = l;
  for (int pass = 0; pass < d; ++pass) {
    std::vector<double> next(static_cast<size_t>((len - 1) * c));
    for (int64_t t = 0; t + 1 < len; ++t)
      for (int64_t ch = 0; ch < c; ++ch)
        next[static_cast<size_t>(t * c + ch)] =
            cur[static_cast<size_t>((t + 1) * c + ch)] - cur[static_cast<size_t>(t * c + ch)];
    cur = std::move(next);
    --len;
  }
  return cur;
}

PcaResult trajectory_pca(const Matrix& x, int components) {
  if (x.rows <= 3) throw ValueError("trajectory_pca: need more than 3 rows");
  if (components < 1) throw ValueError("trajectory_pca: need at least one component");
  const int64_t d = x.cols;

  std::vector<double> mean(static_cast<size_t>(d), 0.0);
  for (int64_t i = 0; i < x.rows; ++i)
    for (int64_t j = 0; j < d; ++j) mean[static_cast<size_t>(j)] += x.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(x.rows);

  // Covariance (population) then cyclic Jacobi sweeps.
  std::vector<double> cov(static_cast<size_t>(d * d), 0.0);
  for (int64_t i = 0; i < x.rows; ++i)
    for (int64_t j = 0; j < d; ++j) {
      double xj = x.at(i, j) - mean[static_cast<size_t>(j)];
      for (int64_t p = j; p < d; ++p)
        cov[static_cast<size_t>(j * d + p)] += xj * (x.at(i, p) - mean[static_cast<size_t>(p)]);
    }
  for (int64_t j = 0; j < d; ++j)
    for (int64_t p = 0; p < j; ++p) cov[static_cast<size_t>(j * d + p)] = cov[static_cast<size_t>(p * d + j)];
  for (auto& v : cov) v /= static_cast<double>(x.rows - 1);

  std::vector<double> eig(cov);
  std::vector<double> vec(static_cast<size_t>(d * d), 0.0);
  for (int64_t j = 0; j < d; ++j) vec[static_cast<size_t>(j * d + j)] = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int64_t p = 0; p < d; ++p)
      for (int64_t q = p + 1; q < d; ++q) off += eig[static_cast<size_t>(p * d + q)] * eig[static_cast<size_t>(p * d + q)];
    if (off < 1e-24) break;
    for (int64_t p = 0; p < d; ++p)
      for (int64_t q = p + 1; q < d; ++q) {
        double apq = eig[static_cast<size_t>(p * d + q)];
        if (std::abs(apq) < 1e-300) continue;
        double app = eig[static_cast<size_t>(p * d + p)], aqq = eig[static_cast<size_t>(q * d + q)];
        double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
        double c = std::cos(theta), s = std::sin(theta);
        for (int64_t r = 0; r < d; ++r) {
          double arp = eig[static_cast<size_t>(r * d + p)], arq = eig[static_cast<size_t>(r * d + q)];
          eig[static_cast<size_t>(r * d + p)] = c * arp - s * arq;
          eig[static_cast<size_t>(r * d + q)] = s * arp + c * arq;
        }
        for (int64_t r = 0; r < d; ++r) {
          double apr = eig[static_cast<size_t>(p * d + r)], aqr = eig[static_cast<size_t>(q * d + r)];
          eig[static_cast<size_t>(p * d + r)] = c * apr - s * aqr;
          eig[static_cast<size_t>(q * d + r)] = s * apr + c * aqr;
        }
        for (int64_t r = 0; r < d; ++r) {
          double vrp = vec[static_cast<size_t>(r * d + p)], vrq = vec[static_cast<size_t>(r * d + q)];
          vec[static_cast<size_t>(r * d + p)] = c * vrp - s * vrq;
          vec[static_cast<size_t>(r * d + q)] = s * vrp + c * vrq;
        }
      }
  }

  std::vector<std::pair<double, int64_t>> eigvals(static_cast<size_t>(d));
  double trace = 0.0;
  for (int64_t j = 0; j < d; ++j) {
    eigvals[static_cast<size_t>(j)] = {eig[static_cast<size_t>(j * d + j)], j};
    trace += std::max(0.0, eig[static_cast<size_t>(j * d + j)]);
  }
  std::sort(eigvals.begin(), eigvals.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  int avail = 0;
  double tol = std::max(1e-12, 1e-9 * std::max(eigvals[0].first, 0.0));
  for (int64_t j = 0; j < d && avail < components; ++j)
    if (eigvals[static_cast<size_t>(j)].first > tol) ++avail;
  if (avail < components)
    std::cerr << "trajectory_pca: rank " << avail << " < requested " << components
              << " components; returning " << avail << "\n";

  PcaResult result;
  result.components = avail;
  result.projection.rows = x.rows;
  result.projection.cols = avail;
  result.projection.v.assign(static_cast<size_t>(x.rows * avail), 0.0);
  result.explained_ratio.resize(static_cast<size_t>(avail));
  for (int comp = 0; comp < avail; ++comp) {
    int64_t col = eigvals[static_cast<size_t>(comp)].second;
    // Sign convention: largest-magnitude loading positive.
    int64_t arg = 0;
    double best = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      double v = std::abs(vec[static_cast<size_t>(j * d + col)]);
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    double sign = vec[static_cast<size_t>(arg * d + col)] >= 0.0 ? 1.0 : -1.0;
    result.explained_ratio[static_cast<size_t>(comp)] =
        trace > 0.0 ? std::max(0.0, eigvals[static_cast<size_t>(comp)].first) / trace : 0.0;
    for (int64_t i = 0; i < x.rows; ++i) {
      double acc = 0.0;
      for (int64_t j = 0; j < d; ++j)
        acc += (x.at(i, j) - mean[static_cast<size_t>(j)]) * vec[static_cast<size_t>(j * d + col)];
      result.projection.at(i, comp) = sign * acc;
    }
  }
  return result;
}

// ---- benchmark -------------------------------------------------------------

std::string BenchResult::csv_header() {
  return "kernel,L,N,C,threads,repeats,precompute_mean_s,precompute_std_s,epoch_mean_s,"
         "epoch_std_s,total_mean_s";
}

std::string BenchResult::csv_row() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << kernel << "," << l << "," << n << "," << c << "," << threads << ","
     << repeats << "," << precompute_mean << "," << precompute_std << "," << epoch_mean << ","
     << epoch_std << "," << total_mean;
  return os.str();
}

namespace {

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

BenchResult bench_similarity(int64_t l, int64_t n, int64_t c, const std::string& kernel,
                             int threads, int repeats, uint64_t seed) {
  if (l < 9 || n < 2 || c < 1) throw ValueError("bench: sizes too small");
  if (kernel != "mxcorr" && kernel != "dtw") throw ValueError("bench: kernel must be mxcorr or dtw");
  if (repeats < 1) throw ValueError("bench: repeats must be >= 1");

  // Simulated tone + noise with a planted period of 32 samples.
  Rng rng(seed);
  TimeSeriesDataset ds;
  ds.n = n;
  ds.l = l;
  ds.c = c;
  ds.values.resize(static_cast<size_t>(n * l * c));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t t = 0; t < l; ++t)
      for (int64_t ch = 0; ch < c; ++ch)
        ds.at(i, t, ch) = std::sin(2.0 * M_PI * static_cast<double>(t) / 32.0 +
                                   0.37 * static_cast<double>(ch)) +
                          rng.normal(0.0, 0.3);

  BenchResult result;
  result.kernel = kernel;
  result.l = l;
  result.n = n;
  result.c = c;
  result.threads = threads;
  result.repeats = repeats;

  std::vector<double> pre_times, epoch_times;
  volatile double sink = 0.0;  // keep the kernels honest
  for (int rep = 0; rep < repeats; ++rep) {
    if (kernel == "dtw") {
      // SoftCLT-style precompute: the full pairwise DTW matrix on raw series.
      auto start = std::chrono::steady_clock::now();
      double acc = 0.0;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j)
          acc += dtw_distance(ds.series(i), l, ds.series(j), l, c);
      sink = sink + acc;
      pre_times.push_back(elapsed_seconds(start));
      epoch_times.push_back(0.0);  // training reads the cached matrix
    } else {
      // No precompute: similarity structures are built on the fly per epoch.
      pre_times.push_back(0.0);
      int window = 32;
      try {
        window = detect_periods(ds, 1).entries.front().window;
      } catch (const PeriodFallbackError& e) {
        window = e.suggested_window;
      }
      auto start = std::chrono::steady_clock::now();
      double acc = 0.0;
      int64_t batch = std::min<int64_t>(128, n);
      std::vector<double> buf;
      for (int64_t lo = 0; lo < n; lo += batch) {
        int64_t b = std::min(batch, n - lo);
        if (b < 2) break;
        std::vector<PatchView> views;
        views.reserve(static_cast<size_t>(b));
        for (int64_t bi = 0; bi < b; ++bi) views.push_back(segment(ds.series(lo + bi), l, c, window));
        buf.assign(static_cast<size_t>(b * views[0].window * c), 0.0);
        for (int64_t m = 0; m < views[0].count; ++m) {
          if (!views[0].usable[static_cast<size_t>(m)]) continue;
          for (int64_t bi = 0; bi < b; ++bi) {
            auto patch = views[static_cast<size_t>(bi)].patch(m);
            std::copy(patch.begin(), patch.end(), buf.begin() + bi * views[0].window * c);
          }
          auto sims = mxcorr_local(buf, b, views[0].window, c, threads);
          acc += sims.at(0, 1);
        }
      }
      for (int64_t i = 0; i < n; ++i) {
        PatchView view = segment(ds.series(i), l, c, window);
        if (view.usable_count() < 2) continue;
        auto sims = mxcorr_global(view, threads);
        acc += sims.at(0, 1);
      }
      sink = sink + acc;
      epoch_times.push_back(elapsed_seconds(start));
    }
  }
  (void)sink;
  mean_std(pre_times, result.precompute_mean, result.precompute_std);
  mean_std(epoch_times, result.epoch_mean, result.epoch_std);
  result.total_mean = result.precompute_mean + result.epoch_mean;
  return result;
}

}  // namespace plants
