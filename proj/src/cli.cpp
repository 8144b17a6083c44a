#include "plants/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "plants/checkpoint.hpp"
#include "plants/eval.hpp"
#include "plants/losses.hpp"
#include "plants/patching.hpp"
#include "plants/periodicity.hpp"
#include "plants/similarity.hpp"
#include "plants/training.hpp"

namespace plants::cli {

namespace {

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  return out;
}

// Flat key=value config file; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r' || line.back() == '\t'))
      line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + ": expected key=value", line_no);
    kv[line.substr(start, eq - start)] = line.substr(eq + 1);
  }
  return kv;
}

void apply_config_map(const std::map<std::string, std::string>& kv, TrainingConfig& cfg,
                      std::string& input, std::string& out_dir) {
  for (const auto& [key, value] : kv) {
    try {
      if (key == "alpha") cfg.alpha = std::stod(value);
      else if (key == "lambda") cfg.lambda = std::stod(value);
      else if (key == "k") cfg.k = std::stoi(value);
      else if (key == "windows") {
        cfg.windows = parse_int_list(value);
        cfg.explicit_windows = true;
        cfg.k = 0;
      }
      else if (key == "batch_size") cfg.batch_size = std::stoi(value);
      else if (key == "lr") cfg.lr = std::stod(value);
      else if (key == "epochs") cfg.epochs = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "hidden") cfg.hidden = std::stoi(value);
      else if (key == "depth") cfg.depth = std::stoi(value);
      else if (key == "kernel") cfg.kernel = std::stoi(value);
      else if (key == "d_l") cfg.d_l = std::stoi(value);
      else if (key == "d_t") cfg.d_t = std::stoi(value);
      else if (key == "head_hidden") cfg.head_hidden = std::stoi(value);
      else if (key == "temperature") cfg.temperature = std::stod(value);
      else if (key == "normalize_embeddings") cfg.normalize_embeddings = std::stoi(value) != 0;
      else if (key == "ntp_stop_gradient") cfg.ntp_stop_gradient = std::stoi(value) != 0;
      else if (key == "early_stop") cfg.early_stop = std::stoi(value) != 0;
      else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "input") input = value;
      else if (key == "out_dir") out_dir = value;
      else throw DataError("config: unknown key '" + key + "'");
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      throw DataError("config: unparsable value for key '" + key + "'");
    }
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  return os;
}

// Instance-level features (max-pooled) with per-instance labels (explicit or
// majority over timesteps).
void instance_features(const TimeSeriesDataset& reps, const TimeSeriesDataset& labeled,
                       Matrix& x, std::vector<int32_t>& y) {
  x.rows = reps.n;
  x.cols = reps.c;
  x.v = reps.instance_block;
  y.clear();
  for (int64_t i = 0; i < labeled.n; ++i) {
    if (labeled.has_instance_labels()) {
      y.push_back(labeled.instance_labels[static_cast<size_t>(i)]);
    } else if (labeled.has_step_labels()) {
      std::map<int32_t, int> votes;
      for (int64_t t = 0; t < labeled.l; ++t)
        ++votes[labeled.step_labels[static_cast<size_t>(i * labeled.l + t)]];
      int32_t best = votes.begin()->first;
      for (const auto& [label, count] : votes)
        if (count > votes[best]) best = label;
      y.push_back(best);
    } else {
      throw DataError("probe: dataset has no labels");
    }
  }
}

// ---- subcommands -----------------------------------------------------------

int cmd_periods(const std::string& input, int k) {
  TimeSeriesDataset ds = load_dataset(input);
  Spectrum spec = amplitude_spectrum(ds);
  PeriodSet ps = top_k_periods(spec, k);
  std::cout << "frequency,amplitude,window\n";
  for (const auto& e : ps.entries)
    std::cout << e.frequency << "," << e.amplitude << "," << e.window << "\n";
  return 0;
}

int cmd_train(TrainingConfig cfg, const std::string& input, const std::string& out_dir,
              const std::string& sweep_alpha, const std::string& sweep_lambda) {
  if (input.empty()) throw ValueError("train: no input dataset (flag --input or config key)");
  TimeSeriesDataset ds = load_dataset(input);

  if (sweep_alpha.empty() && sweep_lambda.empty()) {
    RunArtifacts art = train(cfg, ds, out_dir);
    std::cout << "windows=";
    auto ws = art.periods.windows();
    for (size_t i = 0; i < ws.size(); ++i) std::cout << (i ? "," : "") << ws[i];
    std::cout << "\nepochs_run=" << art.epochs_run << "\nfinal_loss=" << art.final_loss
              << "\ncheckpoint=" << art.checkpoint_path << "\nloss_log=" << art.loss_log_path
              << "\nmanifest=" << art.manifest_path << "\n";
    return 0;
  }

  // Appendix-C-style sensitivity grid: rerun per (alpha, lambda), report the
  // relative change in final loss against the best cell.
  std::vector<double> alphas = sweep_alpha.empty() ? std::vector<double>{cfg.alpha}
                                                   : parse_double_list(sweep_alpha);
  std::vector<double> lambdas = sweep_lambda.empty() ? std::vector<double>{cfg.lambda}
                                                     : parse_double_list(sweep_lambda);
  struct Cell {
    double alpha, lambda, loss;
  };
  std::vector<Cell> cells;
  for (double a : alphas)
    for (double l : lambdas) {
      TrainingConfig c = cfg;
      c.alpha = a;
      c.lambda = l;
      std::ostringstream dir;
      dir << out_dir << "/sweep_a" << a << "_l" << l;
      RunArtifacts art = train(c, ds, dir.str());
      cells.push_back({a, l, art.final_loss});
    }
  double best = HUGE_VAL;
  for (const auto& cell : cells) best = std::min(best, cell.loss);
  auto os = open_out(out_dir + "/sweep.csv");
  os << "alpha,lambda,final_loss,rel_change_vs_best\n";
  std::cout << "alpha,lambda,final_loss,rel_change_vs_best\n";
  for (const auto& cell : cells) {
    double rel = best != 0.0 ? (cell.loss - best) / std::abs(best) : 0.0;
    os << cell.alpha << "," << cell.lambda << "," << cell.loss << "," << rel << "\n";
    std::cout << cell.alpha << "," << cell.lambda << "," << cell.loss << "," << rel << "\n";
  }
  return 0;
}

int cmd_encode(const std::string& checkpoint, const std::string& input,
               const std::string& output) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  TimeSeriesDataset ds = load_dataset(input);
  TimeSeriesDataset reps = encode_dataset(ck.model, ck.standardizer, ds);
  save_dataset(reps, output, DataFormat::Binary);
  std::cout << "encoded n=" << reps.n << " l=" << reps.l << " d=" << reps.c << " -> " << output
            << "\n";
  return 0;
}

int cmd_probe(const std::string& checkpoint, const std::string& train_path,
              const std::string& test_path, const std::string& kind, const std::string& level,
              int window, const std::string& horizons_csv, const std::string& output,
              uint64_t seed) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  TimeSeriesDataset train_ds = load_dataset(train_path);

  std::ostringstream csv;
  if (kind == "forecast") {
    TimeSeriesDataset train_reps = encode_dataset(ck.model, ck.standardizer, train_ds);
    auto horizons = parse_int_list(horizons_csv);
    ForecastReport report = forecast_probe(train_reps, train_ds, horizons);
    csv << "horizon,mse,mae,baseline_mse,baseline_mae\n";
    std::cout << "forecast probe (ridge on frozen representations vs raw window)\n";
    for (const auto& h : report.horizons) {
      csv << h.horizon << "," << h.mse << "," << h.mae << "," << h.baseline_mse << ","
          << h.baseline_mae << "\n";
      std::cout << "  H=" << h.horizon << " mse=" << h.mse << " mae=" << h.mae
                << " baseline_mse=" << h.baseline_mse << " baseline_mae=" << h.baseline_mae
                << "\n";
    }
  } else {
    ProbeKind pk;
    if (kind == "linear") pk = ProbeKind::Linear;
    else if (kind == "knn") pk = ProbeKind::Knn;
    else throw ValueError("probe: kind must be linear, knn or forecast");
    TimeSeriesDataset test_ds = load_dataset(test_path);

    Matrix xtr, xte;
    std::vector<int32_t> ytr, yte;
    if (level == "window") {
      if (window < 1) {
        TimeSeriesDataset std_train = ck.standardizer.applied(train_ds);
        window = detect_periods(std_train, 1).entries.front().window;
        std::cerr << "probe: using detected window " << window << "\n";
      }
      WindowReps wr_train = window_representations(ck.model, ck.standardizer, train_ds, window);
      WindowReps wr_test = window_representations(ck.model, ck.standardizer, test_ds, window);
      xtr = wr_train.x;
      ytr = wr_train.y;
      xte = wr_test.x;
      yte = wr_test.y;
    } else if (level == "instance") {
      TimeSeriesDataset train_reps = encode_dataset(ck.model, ck.standardizer, train_ds);
      TimeSeriesDataset test_reps = encode_dataset(ck.model, ck.standardizer, test_ds);
      instance_features(train_reps, train_ds, xtr, ytr);
      instance_features(test_reps, test_ds, xte, yte);
    } else {
      throw ValueError("probe: level must be instance or window");
    }
    ProbeReport report = classify_probe(xtr, ytr, xte, yte, pk, seed);
    csv << "task,accuracy,chance,seed\n"
        << report.task << "," << report.accuracy << "," << report.chance << "," << report.seed
        << "\n";
    std::cout << report.task << ": accuracy=" << report.accuracy << " (chance=" << report.chance
              << ")\n";
  }
  if (!output.empty()) open_out(output) << csv.str();
  return 0;
}

int cmd_anomaly(const std::string& checkpoint, const std::string& input, int64_t instance,
                int64_t t, const std::string& output) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  TimeSeriesDataset ds = load_dataset(input);
  if (instance < 0 || instance >= ds.n) throw ValueError("anomaly: instance index out of range");
  std::ostringstream csv;
  csv << "t,score\n";
  if (t >= 0) {
    double score = anomaly_score(ck.model, ck.standardizer, ds.series(instance), ds.l, ds.c, t);
    csv << t << "," << score << "\n";
    std::cout << "anomaly score at t=" << t << ": " << score << "\n";
  } else {
    auto scores = anomaly_scores(ck.model, ck.standardizer, ds.series(instance), ds.l, ds.c);
    for (int64_t tt = 0; tt < ds.l; ++tt) csv << tt << "," << scores[static_cast<size_t>(tt)] << "\n";
    std::cout << "scored " << ds.l << " positions of instance " << instance << "\n";
  }
  if (!output.empty()) open_out(output) << csv.str();
  return 0;
}

int cmd_bench(int64_t l, int64_t n, int64_t c, const std::string& kernel, int threads,
              int repeats, uint64_t seed, const std::string& output) {
  BenchResult result = bench_similarity(l, n, c, kernel, threads, repeats, seed);
  std::cout << BenchResult::csv_header() << "\n" << result.csv_row() << "\n";
  if (!output.empty()) {
    bool fresh = !std::ifstream(output).good();
    std::ofstream os(output, std::ios::app);
    if (!os) throw DataError("cannot write " + output);
    if (fresh) os << BenchResult::csv_header() << "\n";
    os << result.csv_row() << "\n";
  }
  return 0;
}

int cmd_synth(int states, int64_t n, int64_t l, int64_t c, int dwell, double noise,
              const std::string& transition, uint64_t seed, const std::string& output,
              const std::string& format) {
  HmmSpec spec;
  if (transition == "cyclic") spec = HmmSpec::cyclic(states, dwell, noise);
  else if (transition == "uniform") spec = HmmSpec::uniform(states, dwell, noise);
  else if (transition == "identity") spec = HmmSpec::identity(states, dwell, noise);
  else throw ValueError("synth: transition must be cyclic, uniform or identity");
  TimeSeriesDataset ds = gen_hmm_mts(spec, n, l, c, seed);
  save_dataset(ds, output, format == "csv" ? DataFormat::Csv : DataFormat::Binary);
  std::cout << "wrote " << output << " (n=" << n << " l=" << l << " c=" << c << ", "
            << states << "-state " << transition << " chain, dwell=" << dwell << ")\n";
  return 0;
}

int cmd_traj(const std::string& checkpoint, const std::string& input, int64_t instance,
             int components, const std::string& output) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  TimeSeriesDataset ds = load_dataset(input);
  if (instance < 0 || instance >= ds.n) throw ValueError("traj: instance index out of range");
  TimeSeriesDataset reps = encode_dataset(ck.model, ck.standardizer, ds);

  Matrix x;
  x.rows = reps.l;
  x.cols = reps.c;
  x.v.assign(reps.values.begin() + instance * reps.l * reps.c,
             reps.values.begin() + (instance + 1) * reps.l * reps.c);
  PcaResult pca = trajectory_pca(x, components);

  std::ostringstream csv;
  csv << "t";
  for (int comp = 0; comp < pca.components; ++comp) csv << ",pc" << (comp + 1);
  csv << ",state_label\n";
  for (int64_t t = 0; t < reps.l; ++t) {
    csv << t;
    for (int comp = 0; comp < pca.components; ++comp) csv << "," << pca.projection.at(t, comp);
    int32_t label = ds.has_step_labels() ? ds.step_labels[static_cast<size_t>(instance * ds.l + t)] : -1;
    csv << "," << label << "\n";
  }
  if (!output.empty()) open_out(output) << csv.str();
  std::cout << "explained_variance_ratio=";
  for (int comp = 0; comp < pca.components; ++comp)
    std::cout << (comp ? "," : "") << pca.explained_ratio[static_cast<size_t>(comp)];
  std::cout << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"PLanTS: periodicity-aware self-supervised representations for multivariate "
               "time series"};
  app.require_subcommand(1);

  // periods
  auto* periods = app.add_subcommand("periods", "Detect dominant periods (amplitude spectrum)");
  std::string p_input;
  int p_k = 3;
  periods->add_option("--input", p_input, "dataset (csv or binary)")->required();
  periods->add_option("--k", p_k, "number of dominant frequencies");

  // train
  auto* tr = app.add_subcommand("train", "Self-supervised training");
  std::string t_config, t_input, t_out = "run", t_windows, t_sweep_alpha, t_sweep_lambda;
  TrainingConfig base_cfg;
  double t_alpha = -1, t_lambda = -1, t_lr = -1, t_temperature = -1;
  int t_k = -1, t_batch = -1, t_epochs = -1, t_threads = -1;
  int64_t t_seed = -1;
  tr->add_option("--config", t_config, "flat key=value config file");
  tr->add_option("--input", t_input, "training dataset");
  tr->add_option("--out", t_out, "output directory");
  tr->add_option("--alpha", t_alpha, "local/global blend");
  tr->add_option("--lambda", t_lambda, "contrastive/NTP blend");
  tr->add_option("--k", t_k, "top-K periods");
  tr->add_option("--windows", t_windows, "explicit window sizes, comma separated");
  tr->add_option("--batch-size", t_batch, "mini-batch size");
  tr->add_option("--lr", t_lr, "learning rate");
  tr->add_option("--epochs", t_epochs, "training epochs");
  tr->add_option("--seed", t_seed, "RNG seed");
  tr->add_option("--temperature", t_temperature, "softmax temperature");
  tr->add_option("--threads", t_threads, "similarity worker threads");
  tr->add_option("--sweep-alpha", t_sweep_alpha, "comma list: sweep alpha over these values");
  tr->add_option("--sweep-lambda", t_sweep_lambda, "comma list: sweep lambda over these values");

  // encode
  auto* enc = app.add_subcommand("encode", "Encode a dataset with a checkpoint");
  std::string e_ck, e_input, e_output;
  enc->add_option("--checkpoint", e_ck)->required();
  enc->add_option("--input", e_input)->required();
  enc->add_option("--output", e_output)->required();

  // probe
  auto* pr = app.add_subcommand("probe", "Downstream probes on frozen representations");
  std::string pr_ck, pr_train, pr_test, pr_kind = "linear", pr_level = "instance",
              pr_horizons = "8,16,32", pr_output;
  int pr_window = -1;
  uint64_t pr_seed = 0;
  pr->add_option("--checkpoint", pr_ck)->required();
  pr->add_option("--train", pr_train)->required();
  pr->add_option("--test", pr_test, "held-out dataset (classification probes)");
  pr->add_option("--kind", pr_kind, "linear | knn | forecast");
  pr->add_option("--level", pr_level, "instance | window");
  pr->add_option("--window", pr_window, "window length for level=window (default: detected)");
  pr->add_option("--horizons", pr_horizons, "forecast horizons, comma separated");
  pr->add_option("--output", pr_output, "CSV report path");
  pr->add_option("--seed", pr_seed);

  // anomaly
  auto* an = app.add_subcommand("anomaly", "Masked-vs-unmasked representation distance");
  std::string a_ck, a_input, a_output;
  int64_t a_instance = 0, a_t = -1;
  an->add_option("--checkpoint", a_ck)->required();
  an->add_option("--input", a_input)->required();
  an->add_option("--instance", a_instance);
  an->add_option("--t", a_t, "single position (default: all)");
  an->add_option("--output", a_output, "CSV path");

  // bench
  auto* be = app.add_subcommand("bench", "Similarity-structure runtime benchmark");
  int64_t b_l = 256, b_n = 500, b_c = 3;
  std::string b_kernel = "mxcorr", b_output;
  int b_threads = 1, b_repeats = 3;
  uint64_t b_seed = 0;
  be->add_option("--l", b_l);
  be->add_option("--n", b_n);
  be->add_option("--c", b_c);
  be->add_option("--kernel", b_kernel, "mxcorr | dtw");
  be->add_option("--threads", b_threads);
  be->add_option("--repeats", b_repeats);
  be->add_option("--seed", b_seed);
  be->add_option("--output", b_output, "append the CSV row here");

  // synth
  auto* sy = app.add_subcommand("synth", "Generate HMM-driven synthetic data");
  int s_states = 4, s_dwell = 25;
  int64_t s_n = 64, s_l = 400, s_c = 3;
  double s_noise = 0.2;
  std::string s_transition = "cyclic", s_output, s_format = "binary";
  uint64_t s_seed = 0;
  sy->add_option("--states", s_states);
  sy->add_option("--n", s_n);
  sy->add_option("--l", s_l);
  sy->add_option("--c", s_c);
  sy->add_option("--dwell", s_dwell);
  sy->add_option("--noise", s_noise);
  sy->add_option("--transition", s_transition, "cyclic | uniform | identity");
  sy->add_option("--seed", s_seed);
  sy->add_option("--output", s_output)->required();
  sy->add_option("--format", s_format, "binary | csv");

  // traj
  auto* tj = app.add_subcommand("traj", "Top principal components of one encoding");
  std::string j_ck, j_input, j_output;
  int64_t j_instance = 0;
  int j_components = 3;
  tj->add_option("--checkpoint", j_ck)->required();
  tj->add_option("--input", j_input)->required();
  tj->add_option("--instance", j_instance);
  tj->add_option("--components", j_components);
  tj->add_option("--output", j_output, "CSV path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      app.exit(e);
      return 0;
    }
    std::cerr << e.what() << "\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (periods->parsed()) return cmd_periods(p_input, p_k);
    if (tr->parsed()) {
      TrainingConfig cfg = base_cfg;
      std::string input = t_input, out_dir = t_out;
      if (!t_config.empty()) {
        std::string cfg_input, cfg_out;
        apply_config_map(read_config_file(t_config), cfg, cfg_input, cfg_out);
        if (input.empty()) input = cfg_input;
        if (out_dir == "run" && !cfg_out.empty()) out_dir = cfg_out;
      }
      if (t_alpha >= 0) cfg.alpha = t_alpha;
      if (t_lambda >= 0) cfg.lambda = t_lambda;
      if (t_k >= 0) {
        cfg.k = t_k;
        cfg.windows.clear();
        cfg.explicit_windows = false;
      }
      if (!t_windows.empty()) {
        cfg.windows = parse_int_list(t_windows);
        cfg.explicit_windows = true;
        cfg.k = 0;
      }
      if (t_batch >= 0) cfg.batch_size = t_batch;
      if (t_lr >= 0) cfg.lr = t_lr;
      if (t_epochs >= 0) cfg.epochs = t_epochs;
      if (t_seed >= 0) cfg.seed = static_cast<uint64_t>(t_seed);
      if (t_temperature >= 0) cfg.temperature = t_temperature;
      if (t_threads >= 0) cfg.threads = t_threads;
      return cmd_train(cfg, input, out_dir, t_sweep_alpha, t_sweep_lambda);
    }
    if (enc->parsed()) return cmd_encode(e_ck, e_input, e_output);
    if (pr->parsed()) {
      if (pr_kind != "forecast" && pr_test.empty())
        throw ValueError("probe: --test is required for classification probes");
      return cmd_probe(pr_ck, pr_train, pr_test, pr_kind, pr_level, pr_window, pr_horizons,
                       pr_output, pr_seed);
    }
    if (an->parsed()) return cmd_anomaly(a_ck, a_input, a_instance, a_t, a_output);
    if (be->parsed()) return cmd_bench(b_l, b_n, b_c, b_kernel, b_threads, b_repeats, b_seed, b_output);
    if (sy->parsed())
      return cmd_synth(s_states, s_n, s_l, s_c, s_dwell, s_noise, s_transition, s_seed, s_output,
                       s_format);
    if (tj->parsed()) return cmd_traj(j_ck, j_input, j_instance, j_components, j_output);
    std::cerr << app.help() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const PeriodFallbackError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ValueError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace plants::cli
