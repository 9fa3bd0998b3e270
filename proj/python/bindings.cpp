#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dpcc/codec.hpp"
#include "dpcc/evaluation.hpp"
#include "dpcc/training.hpp"

namespace py = pybind11;
using namespace dpcc;

namespace {

ModelConfig config_from_dict(const py::dict& d) {
  ModelConfig cfg;
  for (auto item : d) {
    auto key = py::cast<std::string>(item.first);
    py::handle v = item.second;
    if (key == "C") cfg.C = py::cast<int>(v);
    else if (key == "C_z") cfg.C_z = py::cast<int>(v);
    else if (key == "S") cfg.S = py::cast<int>(v);
    else if (key == "k_enc") cfg.k_enc = py::cast<int>(v);
    else if (key == "k_gen") cfg.k_gen = py::cast<int>(v);
    else if (key == "heads") cfg.heads = py::cast<int>(v);
    else if (key == "label_vocab") cfg.label_vocab = py::cast<int>(v);
    else if (key == "T") cfg.T = py::cast<int>(v);
    else if (key == "use_shape_latent") cfg.use_shape_latent = py::cast<bool>(v);
    else if (key == "use_detail_latent") cfg.use_detail_latent = py::cast<bool>(v);
    else fail(ErrorKind::usage, "unknown model config key: " + key);
  }
  return cfg;
}

py::dict config_to_dict(const ModelConfig& cfg) {
  py::dict d;
  d["C"] = cfg.C;
  d["C_z"] = cfg.C_z;
  d["S"] = cfg.S;
  d["k_enc"] = cfg.k_enc;
  d["k_gen"] = cfg.k_gen;
  d["heads"] = cfg.heads;
  d["label_vocab"] = cfg.label_vocab;
  d["T"] = cfg.T;
  d["use_shape_latent"] = cfg.use_shape_latent;
  d["use_detail_latent"] = cfg.use_detail_latent;
  return d;
}

TrainConfig train_config_from_dict(const py::dict& d) {
  TrainConfig cfg;
  for (auto item : d) {
    auto key = py::cast<std::string>(item.first);
    py::handle v = item.second;
    if (key == "lambda") cfg.lambda = py::cast<double>(v);
    else if (key == "gamma") cfg.gamma = py::cast<double>(v);
    else if (key == "steps") cfg.steps = py::cast<long long>(v);
    else if (key == "batch") cfg.batch = py::cast<int>(v);
    else if (key == "lr") cfg.lr = py::cast<double>(v);
    else if (key == "lr_decay") cfg.lr_decay = py::cast<double>(v);
    else if (key == "lr_decay_every") cfg.lr_decay_every = py::cast<long long>(v);
    else if (key == "adam_beta1") cfg.adam_beta1 = py::cast<double>(v);
    else if (key == "adam_beta2") cfg.adam_beta2 = py::cast<double>(v);
    else if (key == "points_per_cloud") cfg.points_per_cloud = py::cast<int>(v);
    else if (key == "metrics_every") cfg.metrics_every = py::cast<long long>(v);
    else if (key == "checkpoint_every") cfg.checkpoint_every = py::cast<long long>(v);
    else if (key == "seed") cfg.seed = py::cast<uint64_t>(v);
    else fail(ErrorKind::usage, "unknown train config key: " + key);
  }
  return cfg;
}

std::vector<PointCloud> clouds_from_python(const std::vector<Mat>& arrays,
                                           const std::optional<std::vector<int>>& labels) {
  if (labels)
    require(labels->size() == arrays.size(), ErrorKind::usage,
            "labels must pair up with clouds");
  std::vector<PointCloud> clouds;
  clouds.reserve(arrays.size());
  for (size_t i = 0; i < arrays.size(); ++i) {
    PointCloud c;
    c.points = arrays[i];
    if (labels && (*labels)[i] >= 0) c.label = (*labels)[i];
    clouds.push_back(std::move(c));
  }
  return clouds;
}

std::vector<RdPoint> curve_from_pairs(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<RdPoint> curve;
  curve.reserve(pairs.size());
  for (const auto& [bpp, psnr] : pairs) curve.push_back({0.0, bpp, psnr, 0.0});
  return curve;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "learned lossy point cloud geometry codec";
  m.attr("__version__") = "0.1.0";

  py::register_exception<Error>(m, "DpccError");

  py::class_<Model>(m, "Model")
      .def_property_readonly("config", [](const Model& m_) { return config_to_dict(m_.config()); })
      .def_readonly("trained_lambda", &Model::trained_lambda)
      .def_readonly("trained_gamma", &Model::trained_gamma)
      .def_readonly("trained_steps", &Model::trained_steps)
      .def_property_readonly("n_parameters",
                             [](const Model& m_) { return m_.params().total_size(); });

  m.def(
      "make_model",
      [](const py::dict& config, uint64_t init_seed) {
        return std::make_unique<Model>(config_from_dict(config), init_seed);
      },
      py::arg("config") = py::dict(), py::arg("init_seed") = 7,
      "Build a freshly initialized model; config keys mirror the C++ ModelConfig.");

  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_weights", &load_weights, py::arg("model"), py::arg("path"),
        "Load weights into an existing model; configs must match.");

  m.def(
      "encode",
      [](const Model& model, const Mat& points, uint64_t seed, std::optional<int> label) {
        PointCloud cloud;
        cloud.points = points;
        cloud.label = label;
        EncodeResult enc = encode_cloud(model, cloud, seed);
        return py::bytes(reinterpret_cast<const char*>(enc.bytes.data()), enc.bytes.size());
      },
      py::arg("model"), py::arg("points"), py::arg("seed") = 2024,
      py::arg("label") = std::nullopt,
      "Compress an (N, 3) float array into a .dpcc container image.");

  m.def(
      "decode",
      [](const Model& model, const py::bytes& blob) {
        std::string_view view = blob;
        std::vector<uint8_t> bytes(view.begin(), view.end());
        PointCloud cloud = decode_cloud(model, bytes);
        return py::make_tuple(cloud.points, cloud.label);
      },
      py::arg("model"), py::arg("data"),
      "Reconstruct (points, label) from a .dpcc container image.");

  m.def(
      "train",
      [](Model& model, const std::vector<Mat>& clouds, const py::dict& config,
         const std::optional<std::vector<int>>& labels, const std::string& checkpoint_path,
         const std::string& metrics_path) {
        TrainConfig cfg = train_config_from_dict(config);
        TrainResult result = train_model(model, clouds_from_python(clouds, labels), cfg,
                                         checkpoint_path, metrics_path);
        py::list history;
        for (const TrainMetric& t : result.history) {
          py::dict row;
          row["step"] = t.step;
          row["loss"] = t.loss;
          row["d_mse"] = t.d_mse;
          row["d_cd"] = t.d_cd;
          row["bpp"] = t.bpp;
          history.append(row);
        }
        return history;
      },
      py::arg("model"), py::arg("clouds"), py::arg("config") = py::dict(),
      py::arg("labels") = std::nullopt, py::arg("checkpoint_path") = "",
      py::arg("metrics_path") = "",
      "Minimize the rate-distortion loss in place; returns the metric history.");

  m.def(
      "evaluate",
      [](const std::vector<const Model*>& models, const std::vector<Mat>& clouds,
         uint64_t seed, const std::optional<std::vector<int>>& labels) {
        EvalReport report = evaluate_codec(models, clouds_from_python(clouds, labels), seed);
        py::list rows;
        for (const RdPoint& p : report.table) {
          py::dict row;
          row["lambda"] = p.lambda;
          row["bpp"] = p.bpp;
          row["psnr_d1"] = p.psnr_d1;
          row["chamfer"] = p.chamfer;
          rows.append(row);
        }
        return rows;
      },
      py::arg("models"), py::arg("clouds"), py::arg("seed") = 2024,
      py::arg("labels") = std::nullopt,
      "Encode and decode every cloud with every model; one RD row per model.");

  m.def("chamfer_distance", &chamfer_distance, py::arg("a"), py::arg("b"));
  m.def("d1_psnr", &d1_psnr, py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def("compute_bpp", &compute_bpp, py::arg("container_bytes"), py::arg("n_points"));

  m.def(
      "bd_psnr",
      [](const std::vector<std::pair<double, double>>& a,
         const std::vector<std::pair<double, double>>& b) {
        return bd_psnr(curve_from_pairs(a), curve_from_pairs(b));
      },
      py::arg("anchor"), py::arg("candidate"),
      "Bjontegaard PSNR delta between two [(bpp, psnr), ...] curves.");
  m.def(
      "bd_rate",
      [](const std::vector<std::pair<double, double>>& a,
         const std::vector<std::pair<double, double>>& b) {
        return bd_rate(curve_from_pairs(a), curve_from_pairs(b));
      },
      py::arg("anchor"), py::arg("candidate"),
      "Bjontegaard rate delta in percent between two [(bpp, psnr), ...] curves.");
}
