#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "plants/eval.hpp"
#include "plants/rng.hpp"
#include "plants/training.hpp"

using namespace plants;

namespace {

std::string temp_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "plants_eval_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

Matrix random_matrix(int64_t rows, int64_t cols, uint64_t seed) {
  Rng rng(seed);
  Matrix m{rows, cols, std::vector<double>(static_cast<size_t>(rows * cols))};
  for (auto& v : m.v) v = rng.normal();
  return m;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("identity transition: every instance keeps its initial state") {
  HmmSpec spec = HmmSpec::identity(4, 10, 0.1);
  TimeSeriesDataset ds = gen_hmm_mts(spec, 8, 120, 2, 3);
  for (int64_t i = 0; i < ds.n; ++i) {
    int32_t first = ds.step_labels[static_cast<size_t>(i * ds.l)];
    for (int64_t t = 1; t < ds.l; ++t)
      CHECK(ds.step_labels[static_cast<size_t>(i * ds.l + t)] == first);
  }
}

TEST_CASE("uniform 4-state chain: frequencies within 0.02 of 0.25 at L=10000") {
  HmmSpec spec = HmmSpec::uniform(4, 5, 0.1);
  TimeSeriesDataset ds = gen_hmm_mts(spec, 4, 10000, 1, 7);
  std::vector<int64_t> counts(4, 0);
  for (int32_t s : ds.step_labels) ++counts[static_cast<size_t>(s)];
  for (int64_t c : counts) {
    double freq = static_cast<double>(c) / static_cast<double>(ds.step_labels.size());
    CHECK(std::abs(freq - 0.25) < 0.02);
  }
}

TEST_CASE("same seed gives identical datasets; hmm spec validation") {
  HmmSpec spec = HmmSpec::cyclic(3, 20, 0.3);
  TimeSeriesDataset a = gen_hmm_mts(spec, 4, 100, 2, 11);
  TimeSeriesDataset b = gen_hmm_mts(spec, 4, 100, 2, 11);
  CHECK(a.values == b.values);
  CHECK(a.step_labels == b.step_labels);

  HmmSpec bad = spec;
  bad.transition[0] = 0.5;  // row no longer sums to 1
  CHECK_THROWS_AS(gen_hmm_mts(bad, 2, 50, 1, 0), ValueError);

  HmmSpec ar = HmmSpec::cyclic(2, 10, 0.1);
  ar.regimes[0].kind = EmissionRegime::Kind::Ar2;
  ar.regimes[0].phi1 = 1.2;
  ar.regimes[0].phi2 = 0.3;  // phi1 + phi2 >= 1: non-stationary
  CHECK_THROWS_AS(gen_hmm_mts(ar, 2, 50, 1, 0), ValueError);
  ar.regimes[0].phi1 = 0.5;
  ar.regimes[0].phi2 = 0.2;
  CHECK_NOTHROW(gen_hmm_mts(ar, 2, 50, 1, 0));
}

TEST_CASE("linear probe: linearly separable embedding reaches accuracy 1.0") {
  Matrix train{8, 2, {1, 0, 1.2, 0.1, 0.9, -0.1, 1.1, 0, -1, 0, -0.8, 0.2, -1.2, 0.1, -0.9, 0}};
  std::vector<int32_t> labels{0, 0, 0, 0, 1, 1, 1, 1};
  ProbeReport report = classify_probe(train, labels, train, labels, ProbeKind::Linear);
  CHECK(report.accuracy == 1.0);
  CHECK(report.chance == doctest::Approx(0.5));

  ProbeReport knn = classify_probe(train, labels, train, labels, ProbeKind::Knn);
  CHECK(knn.accuracy == 1.0);
}

TEST_CASE("single-class training set errors") {
  Matrix train = random_matrix(5, 3, 1);
  std::vector<int32_t> labels(5, 0);
  CHECK_THROWS_AS(classify_probe(train, labels, train, labels, ProbeKind::Linear), ValueError);
}

TEST_CASE("shuffled labels land near chance over 20 seeds") {
  // Permutation baseline on a held-out split: train on shuffled labels,
  // score on held-out rows whose labels are equally uninformative.
  const int64_t n = 240, n_tr = 160;
  Matrix x = random_matrix(n, 6, 2);
  std::vector<int32_t> y(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) y[static_cast<size_t>(i)] = static_cast<int32_t>(i % 4);
  Matrix xtr{n_tr, 6, {x.v.begin(), x.v.begin() + n_tr * 6}};
  Matrix xte{n - n_tr, 6, {x.v.begin() + n_tr * 6, x.v.end()}};
  double mean_acc = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<int32_t> shuffled = y;
    rng.shuffle(shuffled);
    std::vector<int32_t> ytr(shuffled.begin(), shuffled.begin() + n_tr);
    std::vector<int32_t> yte(shuffled.begin() + n_tr, shuffled.end());
    mean_acc += classify_probe(xtr, ytr, xte, yte, ProbeKind::Linear, seed).accuracy;
  }
  mean_acc /= 20.0;
  CHECK(std::abs(mean_acc - 0.25) < 0.1);
}

TEST_CASE("knn with train==test (k=5 fixed) averages at least the majority-class rate") {
  // With uninformative features the self-vote plus the class prior keep 5-NN
  // at or above the majority rate in expectation; average 10 feature draws.
  double mean_acc = 0.0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Matrix x = random_matrix(150, 4, 6 + seed);
    std::vector<int32_t> y(150);
    for (size_t i = 0; i < 150; ++i) y[i] = i < 100 ? 0 : 1;  // majority rate 2/3
    mean_acc += classify_probe(x, y, x, y, ProbeKind::Knn).accuracy;
  }
  mean_acc /= 10.0;
  CHECK(mean_acc >= 100.0 / 150.0 - 1e-12);
}

TEST_CASE("forecast probe: horizons validated, constant series scores 0") {
  TimeSeriesDataset raw;
  raw.n = 4;
  raw.l = 60;
  raw.c = 1;
  raw.values.assign(static_cast<size_t>(4 * 60), 2.5);
  TimeSeriesDataset reps = raw;
  reps.c = 3;
  reps.values.assign(static_cast<size_t>(4 * 60 * 3), 0.0);
  Rng rng(8);
  for (auto& v : reps.values) v = rng.normal();

  CHECK_THROWS_AS(forecast_probe(reps, raw, {0}), ValueError);
  CHECK_THROWS_AS(forecast_probe(reps, raw, {60}), ValueError);

  ForecastReport report = forecast_probe(reps, raw, {8});
  REQUIRE(report.horizons.size() == 1);
  CHECK(report.horizons[0].mse < 1e-12);
  CHECK(report.horizons[0].baseline_mse < 1e-12);
}

TEST_CASE("forecast probe: periodic signal with a phase-bearing representation beats raw noise") {
  // representation = clean (sin, cos) phase features; raw input = noisy tone.
  const int64_t n = 8, l = 120, period = 24;
  TimeSeriesDataset raw, reps;
  raw.n = reps.n = n;
  raw.l = reps.l = l;
  raw.c = 1;
  reps.c = 2;
  raw.values.resize(static_cast<size_t>(n * l));
  reps.values.resize(static_cast<size_t>(n * l * 2));
  Rng rng(9);
  for (int64_t i = 0; i < n; ++i) {
    double phase = rng.uniform(0, 2 * M_PI);
    for (int64_t t = 0; t < l; ++t) {
      double theta = 2.0 * M_PI * t / period + phase;
      raw.at(i, t, 0) = std::sin(theta) + rng.normal(0, 0.4);
      reps.at(i, t, 0) = std::sin(theta);
      reps.at(i, t, 1) = std::cos(theta);
    }
  }
  ForecastReport report = forecast_probe(reps, raw, {16});
  CHECK(report.horizons[0].mse < report.horizons[0].baseline_mse);
}

TEST_CASE("difference: identity, ramp, quadratic") {
  std::vector<double> ramp(10);
  for (size_t t = 0; t < 10; ++t) ramp[t] = 3.0 * static_cast<double>(t) + 1.0;
  auto same = difference(ramp, 10, 1, 0);
  CHECK(same == ramp);
  auto d1 = difference(ramp, 10, 1, 1);
  REQUIRE(d1.size() == 9);
  for (double v : d1) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));

  std::vector<double> quad(10);
  for (size_t t = 0; t < 10; ++t) quad[t] = static_cast<double>(t) * static_cast<double>(t);
  auto d2 = difference(quad, 10, 1, 2);
  REQUIRE(d2.size() == 8);
  for (double v : d2) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(difference(ramp, 10, 1, 10), ValueError);
}

TEST_CASE("trajectory_pca: 1-D line explains everything") {
  Matrix x{20, 3, std::vector<double>(60)};
  Rng rng(10);
  for (int64_t i = 0; i < 20; ++i) {
    double s = rng.normal();
    x.at(i, 0) = 2.0 * s;
    x.at(i, 1) = -s;
    x.at(i, 2) = 0.5 * s;
  }
  PcaResult pca = trajectory_pca(x, 3);  // rank 1: expect a warning + 1 comp
  REQUIRE(pca.components >= 1);
  CHECK(pca.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
  double total = 0.0;
  for (double r : pca.explained_ratio) total += r;
  CHECK(total <= 1.0 + 1e-9);
}

TEST_CASE("trajectory_pca matches a power-iteration oracle up to the sign convention") {
  Matrix x = random_matrix(40, 5, 11);
  PcaResult pca = trajectory_pca(x, 3);
  REQUIRE(pca.components == 3);

  // Oracle: covariance + power iteration with deflation.
  const int64_t d = 5;
  std::vector<double> mean(5, 0.0);
  for (int64_t i = 0; i < x.rows; ++i)
    for (int64_t j = 0; j < d; ++j) mean[static_cast<size_t>(j)] += x.at(i, j);
  for (auto& m : mean) m /= static_cast<double>(x.rows);
  std::vector<double> cov(25, 0.0);
  for (int64_t i = 0; i < x.rows; ++i)
    for (int64_t j = 0; j < d; ++j)
      for (int64_t p = 0; p < d; ++p)
        cov[static_cast<size_t>(j * d + p)] +=
            (x.at(i, j) - mean[static_cast<size_t>(j)]) * (x.at(i, p) - mean[static_cast<size_t>(p)]);
  for (auto& v : cov) v /= static_cast<double>(x.rows - 1);

  auto power_iter = [&](std::vector<double>& matrix) {
    std::vector<double> v(5, 1.0 / std::sqrt(5.0));
    for (int it = 0; it < 5000; ++it) {
      std::vector<double> next(5, 0.0);
      for (int64_t j = 0; j < d; ++j)
        for (int64_t p = 0; p < d; ++p) next[static_cast<size_t>(j)] += matrix[static_cast<size_t>(j * d + p)] * v[static_cast<size_t>(p)];
      double norm = 0.0;
      for (double val : next) norm += val * val;
      norm = std::sqrt(norm);
      for (auto& val : next) val /= norm;
      v = next;
    }
    double lambda = 0.0;
    std::vector<double> mv(5, 0.0);
    for (int64_t j = 0; j < d; ++j)
      for (int64_t p = 0; p < d; ++p) mv[static_cast<size_t>(j)] += matrix[static_cast<size_t>(j * d + p)] * v[static_cast<size_t>(p)];
    for (int64_t j = 0; j < d; ++j) lambda += v[static_cast<size_t>(j)] * mv[static_cast<size_t>(j)];
    return std::make_pair(v, lambda);
  };

  std::vector<double> work = cov;
  for (int comp = 0; comp < 3; ++comp) {
    auto [v, lambda] = power_iter(work);
    // compare |projection| columns
    for (int64_t i = 0; i < x.rows; ++i) {
      double proj = 0.0;
      for (int64_t j = 0; j < d; ++j) proj += (x.at(i, j) - mean[static_cast<size_t>(j)]) * v[static_cast<size_t>(j)];
      CHECK(std::abs(std::abs(proj) - std::abs(pca.projection.at(i, comp))) < 1e-8);
    }
    for (int64_t j = 0; j < d; ++j)
      for (int64_t p = 0; p < d; ++p)
        work[static_cast<size_t>(j * d + p)] -= lambda * v[static_cast<size_t>(j)] * v[static_cast<size_t>(p)];
  }
}

TEST_CASE("anomaly: mask-equal position scores 0, scores are nonnegative, spikes stand out") {
  // quick training run on smooth data
  HmmSpec spec = HmmSpec::cyclic(2, 30, 0.05);
  TimeSeriesDataset ds = gen_hmm_mts(spec, 8, 90, 2, 21);
  TrainingConfig cfg;
  cfg.k = 1;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.hidden = 8;
  cfg.depth = 2;
  cfg.d_l = 6;
  cfg.d_t = 6;
  cfg.head_hidden = 8;
  RunArtifacts art = train(cfg, ds, temp_dir("anomaly"));
  LoadedCheckpoint ck = load_checkpoint(art.checkpoint_path);

  // A position whose standardized value already equals the mask value: build
  // a series equal to the channel means at t=40.
  TimeSeriesDataset probe = ds;
  for (int64_t ch = 0; ch < ds.c; ++ch) probe.at(0, 40, ch) = ck.standardizer.mean[static_cast<size_t>(ch)];
  double zero_score =
      anomaly_score(ck.model, ck.standardizer, probe.series(0), ds.l, ds.c, 40);
  CHECK(zero_score == 0.0);

  CHECK_THROWS_AS(anomaly_score(ck.model, ck.standardizer, ds.series(0), ds.l, ds.c, ds.l),
                  ValueError);

  // spike at t=60: 10 sigma on channel 0
  TimeSeriesDataset spiked = ds;
  spiked.at(1, 60, 0) += 10.0 * ck.standardizer.stddev[0];
  auto scores = anomaly_scores(ck.model, ck.standardizer, spiked.series(1), ds.l, ds.c);
  for (double s : scores) CHECK(s >= 0.0);
  std::vector<double> clean;
  for (int64_t t = 0; t < ds.l; ++t)
    if (std::abs(t - 60) > 2) clean.push_back(scores[static_cast<size_t>(t)]);
  std::sort(clean.begin(), clean.end());
  double p99 = clean[static_cast<size_t>(static_cast<double>(clean.size()) * 0.99)];
  CHECK(scores[60] > p99);
}

TEST_CASE("auroc: perfect separation and ties") {
  CHECK(auroc({2, 3, 4}, {0, 1}) == 1.0);
  CHECK(auroc({0, 1}, {2, 3, 4}) == 0.0);
  CHECK(auroc({1, 1}, {1, 1}) == 0.5);
  CHECK_THROWS_AS(auroc({}, {1.0}), ValueError);
}

TEST_CASE("bench: dtw reports nonzero precompute, mxcorr reports none") {
  BenchResult dtw = bench_similarity(64, 24, 2, "dtw", 1, 1, 1);
  CHECK(dtw.precompute_mean > 0.0);
  CHECK(dtw.epoch_mean == 0.0);
  BenchResult mx = bench_similarity(64, 24, 2, "mxcorr", 1, 1, 1);
  CHECK(mx.precompute_mean == 0.0);
  CHECK(mx.epoch_mean > 0.0);
  CHECK(mx.csv_row().find("mxcorr") == 0);
  CHECK(BenchResult::csv_header().find("precompute_mean_s") != std::string::npos);
}

TEST_CASE("bench: doubling N lands in the 3x-5x band for the pairwise dtw kernel") {
  // median of 3 to steady the timer
  auto median_time = [](int64_t n) {
    std::vector<double> times;
    for (int rep = 0; rep < 3; ++rep)
      times.push_back(bench_similarity(48, n, 2, "dtw", 1, 1, 2).precompute_mean);
    std::sort(times.begin(), times.end());
    return times[1];
  };
  double t1 = median_time(60);
  double t2 = median_time(120);
  double ratio = t2 / t1;
  INFO("dtw pairwise scaling ratio " << ratio);
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
}

TEST_CASE("window representations: shapes, majority labels") {
  HmmSpec spec = HmmSpec::identity(2, 10, 0.05);
  TimeSeriesDataset ds = gen_hmm_mts(spec, 6, 60, 2, 31);
  TrainingConfig cfg;
  cfg.k = 1;
  cfg.batch_size = 6;
  cfg.epochs = 1;
  cfg.hidden = 6;
  cfg.depth = 1;
  cfg.d_l = 4;
  cfg.d_t = 4;
  RunArtifacts art = train(cfg, ds, temp_dir("wreps"));
  LoadedCheckpoint ck = load_checkpoint(art.checkpoint_path);
  WindowReps wr = window_representations(ck.model, ck.standardizer, ds, 15);
  CHECK(wr.x.cols == 8);
  CHECK(wr.x.rows == 6 * 4);  // 60/15 windows per instance
  REQUIRE(wr.y.size() == static_cast<size_t>(wr.x.rows));
  // identity chain: every window of instance i carries its constant state
  for (size_t r = 0; r < wr.y.size(); ++r)
    CHECK(wr.y[r] == ds.step_labels[static_cast<size_t>(wr.instance[r] * ds.l)]);
}

}  // TEST_SUITE
