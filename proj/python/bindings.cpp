#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "plants/checkpoint.hpp"
#include "plants/eval.hpp"
#include "plants/losses.hpp"
#include "plants/patching.hpp"
#include "plants/periodicity.hpp"
#include "plants/similarity.hpp"
#include "plants/training.hpp"

namespace py = pybind11;
using namespace plants;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

TimeSeriesDataset dataset_from_array(const Array& data, py::object labels) {
  if (data.ndim() != 3) throw ValueError("expected a (N, L, C) array");
  TimeSeriesDataset ds;
  ds.n = data.shape(0);
  ds.l = data.shape(1);
  ds.c = data.shape(2);
  ds.values.assign(data.data(), data.data() + ds.n * ds.l * ds.c);
  if (!labels.is_none()) {
    auto lab = py::array_t<int32_t, py::array::c_style | py::array::forcecast>::ensure(labels);
    if (lab.ndim() == 2 && lab.shape(0) == ds.n && lab.shape(1) == ds.l)
      ds.step_labels.assign(lab.data(), lab.data() + ds.n * ds.l);
    else if (lab.ndim() == 1 && lab.shape(0) == ds.n)
      ds.instance_labels.assign(lab.data(), lab.data() + ds.n);
    else
      throw ValueError("labels must be (N,) or (N, L)");
  }
  return ds;
}

Array array_3d(const std::vector<double>& v, int64_t n, int64_t l, int64_t c) {
  Array out({n, l, c});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array array_2d(const std::vector<double>& v, int64_t r, int64_t c) {
  Array out({r, c});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Owns a model + standardizer pair; mirrors the checkpoint contents.
struct PyModel {
  PlantsModel model;
  Standardizer standardizer;
  PeriodSet periods;
  std::vector<double> loss_history;
};

TrainingConfig config_from_kwargs(const py::kwargs& kwargs) {
  TrainingConfig cfg;
  for (auto item : kwargs) {
    std::string key = py::cast<std::string>(item.first);
    if (key == "alpha") cfg.alpha = py::cast<double>(item.second);
    else if (key == "lambda_" || key == "lam") cfg.lambda = py::cast<double>(item.second);
    else if (key == "k") cfg.k = py::cast<int>(item.second);
    else if (key == "windows") {
      cfg.windows = py::cast<std::vector<int>>(item.second);
      cfg.explicit_windows = true;
      cfg.k = 0;
    } else if (key == "batch_size") cfg.batch_size = py::cast<int>(item.second);
    else if (key == "lr") cfg.lr = py::cast<double>(item.second);
    else if (key == "epochs") cfg.epochs = py::cast<int>(item.second);
    else if (key == "seed") cfg.seed = py::cast<uint64_t>(item.second);
    else if (key == "hidden") cfg.hidden = py::cast<int>(item.second);
    else if (key == "depth") cfg.depth = py::cast<int>(item.second);
    else if (key == "kernel") cfg.kernel = py::cast<int>(item.second);
    else if (key == "d_l") cfg.d_l = py::cast<int>(item.second);
    else if (key == "d_t") cfg.d_t = py::cast<int>(item.second);
    else if (key == "head_hidden") cfg.head_hidden = py::cast<int>(item.second);
    else if (key == "temperature") cfg.temperature = py::cast<double>(item.second);
    else if (key == "normalize_embeddings") cfg.normalize_embeddings = py::cast<bool>(item.second);
    else if (key == "ntp_stop_gradient") cfg.ntp_stop_gradient = py::cast<bool>(item.second);
    else if (key == "early_stop") cfg.early_stop = py::cast<bool>(item.second);
    else if (key == "threads") cfg.threads = py::cast<int>(item.second);
    else throw ValueError("unknown config key: " + key);
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "PLanTS core: periodicity-aware self-supervised time series representations";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<PeriodFallbackError>(m, "PeriodFallbackError", PyExc_ValueError);
  py::register_exception<ValueError>(m, "ValueError", PyExc_ValueError);
  py::register_exception<Error>(m, "PlantsError", PyExc_RuntimeError);

  m.def(
      "amplitude_spectrum",
      [](const Array& data) {
        TimeSeriesDataset ds = dataset_from_array(data, py::none());
        Spectrum spec = amplitude_spectrum(ds);
        py::array_t<double> out(static_cast<py::ssize_t>(spec.amplitudes.size()));
        std::copy(spec.amplitudes.begin(), spec.amplitudes.end(), out.mutable_data());
        return out;
      },
      py::arg("data"), "Channel- and instance-averaged |DFT| bins of a (N, L, C) array.");

  m.def(
      "periods",
      [](const Array& data, int k) {
        TimeSeriesDataset ds = dataset_from_array(data, py::none());
        PeriodSet ps = detect_periods(ds, k);
        py::list out;
        for (const auto& e : ps.entries)
          out.append(py::make_tuple(e.frequency, e.amplitude, e.window));
        return out;
      },
      py::arg("data"), py::arg("k") = 3,
      "Top-k dominant (frequency, amplitude, window) triples.");

  m.def(
      "segment",
      [](const Array& series, int window) {
        if (series.ndim() != 2) throw ValueError("expected a (L, C) array");
        int64_t l = series.shape(0), c = series.shape(1);
        std::span<const double> s{series.data(), static_cast<size_t>(l * c)};
        PatchView view = segment(s, l, c, window);
        py::dict out;
        out["patches"] = array_3d(view.padded, view.count, view.window, view.channels);
        out["pad_len"] = view.pad_len;
        out["usable"] = std::vector<bool>(view.usable.begin(), view.usable.end());
        return out;
      },
      py::arg("series"), py::arg("window"));

  m.def(
      "mxcorr",
      [](const Array& x, const Array& y) {
        if (x.ndim() != 2 || y.ndim() != 2) throw ValueError("expected (w, C) arrays");
        int64_t w = x.shape(0), c = x.shape(1);
        return mxcorr({x.data(), static_cast<size_t>(w * c)},
                      {y.data(), static_cast<size_t>(y.shape(0) * y.shape(1))}, w, c);
      },
      py::arg("x"), py::arg("y"), "Maximum circular cross-correlation of two windows.");

  m.def(
      "mxcorr_local",
      [](const Array& batch, int threads) {
        if (batch.ndim() != 3) throw ValueError("expected a (B, w, C) array");
        int64_t b = batch.shape(0), w = batch.shape(1), c = batch.shape(2);
        auto sm = mxcorr_local({batch.data(), static_cast<size_t>(b * w * c)}, b, w, c, threads);
        return array_2d(sm.values, sm.extent, sm.extent);
      },
      py::arg("batch"), py::arg("threads") = 1);

  m.def(
      "mxcorr_global",
      [](const Array& series, int window, int threads) {
        if (series.ndim() != 2) throw ValueError("expected a (L, C) array");
        int64_t l = series.shape(0), c = series.shape(1);
        PatchView view = segment({series.data(), static_cast<size_t>(l * c)}, l, c, window);
        auto sm = mxcorr_global(view, threads);
        return array_2d(sm.values, sm.extent, sm.extent);
      },
      py::arg("series"), py::arg("window"), py::arg("threads") = 1);

  m.def(
      "dtw_distance",
      [](const Array& x, const Array& y) {
        if (x.ndim() != 2 || y.ndim() != 2 || x.shape(1) != y.shape(1))
          throw ValueError("expected (L1, C) and (L2, C) arrays");
        return dtw_distance({x.data(), static_cast<size_t>(x.shape(0) * x.shape(1))}, x.shape(0),
                            {y.data(), static_cast<size_t>(y.shape(0) * y.shape(1))}, y.shape(0),
                            x.shape(1));
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "gen_hmm",
      [](int states, int64_t n, int64_t l, int64_t c, int dwell, double noise,
         const std::string& transition, uint64_t seed) {
        HmmSpec spec;
        if (transition == "cyclic") spec = HmmSpec::cyclic(states, dwell, noise);
        else if (transition == "uniform") spec = HmmSpec::uniform(states, dwell, noise);
        else if (transition == "identity") spec = HmmSpec::identity(states, dwell, noise);
        else throw ValueError("transition must be cyclic, uniform or identity");
        TimeSeriesDataset ds = gen_hmm_mts(spec, n, l, c, seed);
        py::array_t<int32_t> labels({n, l});
        std::copy(ds.step_labels.begin(), ds.step_labels.end(), labels.mutable_data());
        return py::make_tuple(array_3d(ds.values, n, l, c), labels);
      },
      py::arg("states") = 4, py::arg("n") = 64, py::arg("l") = 400, py::arg("c") = 3,
      py::arg("dwell") = 25, py::arg("noise") = 0.2, py::arg("transition") = "cyclic",
      py::arg("seed") = 0);

  m.def(
      "classify_probe",
      [](const Array& train_x, const std::vector<int32_t>& train_y, const Array& test_x,
         const std::vector<int32_t>& test_y, const std::string& kind, uint64_t seed) {
        Matrix xtr{train_x.shape(0), train_x.shape(1),
                   {train_x.data(), train_x.data() + train_x.size()}};
        Matrix xte{test_x.shape(0), test_x.shape(1),
                   {test_x.data(), test_x.data() + test_x.size()}};
        auto report = classify_probe(xtr, train_y, xte, test_y,
                                     kind == "knn" ? ProbeKind::Knn : ProbeKind::Linear, seed);
        py::dict out;
        out["task"] = report.task;
        out["accuracy"] = report.accuracy;
        out["chance"] = report.chance;
        return out;
      },
      py::arg("train_x"), py::arg("train_y"), py::arg("test_x"), py::arg("test_y"),
      py::arg("kind") = "linear", py::arg("seed") = 0);

  m.def(
      "trajectory_pca",
      [](const Array& x, int components) {
        Matrix mat{x.shape(0), x.shape(1), {x.data(), x.data() + x.size()}};
        PcaResult pca = trajectory_pca(mat, components);
        py::dict out;
        out["projection"] = array_2d(pca.projection.v, pca.projection.rows, pca.projection.cols);
        out["explained_ratio"] = pca.explained_ratio;
        return out;
      },
      py::arg("x"), py::arg("components") = 3);

  m.def(
      "kl_identity",
      [](const std::vector<double>& p, const std::vector<double>& q) {
        KlParts parts = kl_identity(p, q);
        return py::make_tuple(parts.cross_entropy, parts.kl, parts.entropy);
      },
      py::arg("p"), py::arg("q"), "Returns (H(P,Q), KL(P||Q), H(P)).");

  py::class_<PyModel>(m, "Model")
      .def_static(
          "train",
          [](const Array& data, py::object labels, const py::kwargs& kwargs) {
            TimeSeriesDataset ds = dataset_from_array(data, labels);
            TrainingConfig cfg = config_from_kwargs(kwargs);
            std::string out_dir = "plants_run";
            RunArtifacts art = train(cfg, ds, out_dir);
            LoadedCheckpoint ck = load_checkpoint(art.checkpoint_path);
            PyModel pm{std::move(ck.model), std::move(ck.standardizer), art.periods, {}};
            for (const auto& rec : art.epochs) pm.loss_history.push_back(rec.total);
            return pm;
          },
          py::arg("data"), py::arg("labels") = py::none(),
          "Train on a (N, L, C) array; config fields as keyword arguments "
          "(alpha, lam, k, windows, batch_size, lr, epochs, seed, ...).")
      .def_static("load",
                  [](const std::string& path) {
                    LoadedCheckpoint ck = load_checkpoint(path);
                    return PyModel{std::move(ck.model), std::move(ck.standardizer), {}, {}};
                  })
      .def("save",
           [](const PyModel& pm, const std::string& path) {
             save_checkpoint(path, pm.model, pm.standardizer);
           })
      .def("encode",
           [](const PyModel& pm, const Array& data) {
             TimeSeriesDataset ds = dataset_from_array(data, py::none());
             TimeSeriesDataset reps = encode_dataset(pm.model, pm.standardizer, ds);
             return array_3d(reps.values, reps.n, reps.l, reps.c);
           })
      .def("encode_instances",
           [](const PyModel& pm, const Array& data) {
             TimeSeriesDataset ds = dataset_from_array(data, py::none());
             TimeSeriesDataset reps = encode_dataset(pm.model, pm.standardizer, ds);
             return array_2d(reps.instance_block, reps.n, reps.c);
           })
      .def("anomaly_score",
           [](const PyModel& pm, const Array& series, int64_t t) {
             if (series.ndim() != 2) throw ValueError("expected a (L, C) array");
             int64_t l = series.shape(0), c = series.shape(1);
             return anomaly_score(pm.model, pm.standardizer,
                                  {series.data(), static_cast<size_t>(l * c)}, l, c, t);
           })
      .def_property_readonly("windows",
                             [](const PyModel& pm) { return pm.periods.windows(); })
      .def_property_readonly("loss_history", [](const PyModel& pm) { return pm.loss_history; });
}
