#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcreal/config.hpp"
#include "pcreal/eval.hpp"
#include "pcreal/io.hpp"
#include "pcreal/score.hpp"
#include "pcreal/train.hpp"

namespace py = pybind11;
using namespace pcreal;

namespace {

std::vector<Vec3> to_points(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 3)
    throw std::invalid_argument("expected an array of shape (N, 3)");
  std::vector<Vec3> pts(arr.shape(0));
  auto r = arr.unchecked<2>();
  for (py::ssize_t i = 0; i < arr.shape(0); ++i) pts[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return pts;
}

py::array_t<double> from_points(const std::vector<Vec3>& pts) {
  py::array_t<double> arr({static_cast<py::ssize_t>(pts.size()), py::ssize_t(3)});
  auto w = arr.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w(i, 0) = pts[i].x;
    w(i, 1) = pts[i].y;
    w(i, 2) = pts[i].z;
  }
  return arr;
}

py::array_t<float> from_tensor(const Tensor& t) {
  py::array_t<float> arr({py::ssize_t(t.d0), py::ssize_t(t.d1)});
  auto w = arr.mutable_unchecked<2>();
  for (int i = 0; i < t.d0; ++i)
    for (int j = 0; j < t.d1; ++j) w(i, j) = t.at(i, j);
  return arr;
}

PointCloud cloud_of(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  PointCloud pc;
  pc.points = to_points(arr);
  return pc;
}

struct PyRangeImage {
  eval::RangeImage img;
};

struct PyModel {
  net::MetricModel model;
  score::ScoreOptions opts;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "local realism metric for LiDAR-style point clouds";

  py::class_<ScanPattern>(m, "ScanPattern")
      .def(py::init<>())
      .def_readwrite("rows", &ScanPattern::rows)
      .def_readwrite("cols", &ScanPattern::cols)
      .def_readwrite("elevation_min", &ScanPattern::elevation_min)
      .def_readwrite("elevation_max", &ScanPattern::elevation_max)
      .def_readwrite("azimuth_span", &ScanPattern::azimuth_span)
      .def_readwrite("max_range", &ScanPattern::max_range);

  m.def(
      "gen_geometric_set",
      [](const ScanPattern& pattern, std::uint64_t seed, int style) {
        return from_points(
            pcgen::gen_geometric_set(pcgen::synthetic_scene_style(style), pattern, seed).points);
      },
      py::arg("pattern"), py::arg("seed"), py::arg("style") = 1);

  m.def(
      "gen_real_surrogate",
      [](const ScanPattern& pattern, std::uint64_t seed, int style) {
        return from_points(
            pcgen::gen_real_surrogate(pcgen::real_surrogate_style(style), pattern, seed).points);
      },
      py::arg("pattern"), py::arg("seed"), py::arg("style") = 0);

  m.def(
      "gen_misc",
      [](int kind, const ScanPattern& pattern, std::uint64_t seed) {
        return from_points(pcgen::gen_misc(kind, pattern, pcgen::MiscParams{}, seed).points);
      },
      py::arg("kind"), py::arg("pattern"), py::arg("seed"));

  m.def(
      "add_range_noise",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts, double sigma,
         std::uint64_t seed) {
        return from_points(pcgen::add_range_noise(cloud_of(pts), sigma, seed).cloud.points);
      },
      py::arg("points"), py::arg("sigma"), py::arg("seed"));

  m.def(
      "inject_patch_anomaly",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts, double az_lo,
         double az_hi, double sigma, std::uint64_t seed) {
        auto r = pcgen::inject_patch_anomaly(cloud_of(pts), az_lo, az_hi, sigma, seed);
        py::array_t<bool> mask(static_cast<py::ssize_t>(r.mask.size()));
        auto w = mask.mutable_unchecked<1>();
        for (std::size_t i = 0; i < r.mask.size(); ++i) w(i) = r.mask[i];
        return py::make_tuple(from_points(r.cloud.points), mask);
      },
      py::arg("points"), py::arg("az_lo"), py::arg("az_hi"), py::arg("sigma"), py::arg("seed"));

  m.def(
      "farthest_point_sampling",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts, int m_count) {
        auto qs = spatial::farthest_point_sampling(to_points(pts), m_count);
        py::array_t<int> out(static_cast<py::ssize_t>(qs.indices.size()));
        std::copy(qs.indices.begin(), qs.indices.end(), out.mutable_data());
        return out;
      },
      py::arg("points"), py::arg("m"));

  m.def(
      "knn",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& queries, int k) {
        auto points = to_points(pts);
        auto qs = to_points(queries);
        auto t = spatial::knn(points, qs, k);
        py::array_t<int> arr({static_cast<py::ssize_t>(qs.size()), py::ssize_t(t.k)});
        auto w = arr.mutable_unchecked<2>();
        for (std::size_t q = 0; q < qs.size(); ++q)
          for (int j = 0; j < t.k; ++j) w(q, j) = t.row(q)[j];
        return arr;
      },
      py::arg("points"), py::arg("queries"), py::arg("k"));

  m.def(
      "chamfer",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return eval::chamfer(cloud_of(a), cloud_of(b));
      },
      py::arg("a"), py::arg("b"));

  py::class_<PyRangeImage>(m, "RangeImage")
      .def_property_readonly("rows", [](const PyRangeImage& s) { return s.img.rows; })
      .def_property_readonly("cols", [](const PyRangeImage& s) { return s.img.cols; })
      .def_property_readonly("ranges",
                             [](const PyRangeImage& s) {
                               py::array_t<float> arr(
                                   {py::ssize_t(s.img.rows), py::ssize_t(s.img.cols)});
                               auto w = arr.mutable_unchecked<2>();
                               for (int i = 0; i < s.img.rows; ++i)
                                 for (int j = 0; j < s.img.cols; ++j) w(i, j) = s.img.at(i, j);
                               return arr;
                             })
      .def_property_readonly("mask", [](const PyRangeImage& s) {
        py::array_t<bool> arr({py::ssize_t(s.img.rows), py::ssize_t(s.img.cols)});
        auto w = arr.mutable_unchecked<2>();
        for (int i = 0; i < s.img.rows; ++i)
          for (int j = 0; j < s.img.cols; ++j) w(i, j) = s.img.is_measured(i, j);
        return arr;
      });

  m.def(
      "project",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts,
         const ScanPattern& pattern) {
        auto r = eval::project(cloud_of(pts), pattern);
        return py::make_tuple(PyRangeImage{std::move(r.image)}, r.dropped_points);
      },
      py::arg("points"), py::arg("pattern"));

  m.def(
      "unproject", [](const PyRangeImage& img) { return from_points(eval::unproject(img.img).points); },
      py::arg("image"));

  m.def(
      "bilinear_upsample",
      [](const PyRangeImage& img, int factor) {
        return PyRangeImage{eval::bilinear_upsample(img.img, factor)};
      },
      py::arg("image"), py::arg("factor"));

  m.def("masked_error",
        [](const PyRangeImage& pred, const PyRangeImage& gt, const std::string& kind) {
          return eval::masked_error(pred.img, gt.img,
                                    kind == "mse" ? eval::ErrorKind::MSE : eval::ErrorKind::MAE);
        },
        py::arg("pred"), py::arg("gt"), py::arg("kind") = "mse");

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("num_datasets",
                             [](const PyModel& s) { return s.model.cfg.num_datasets; })
      .def_property_readonly("lambda_", [](const PyModel& s) { return s.model.cfg.lambda; })
      .def(
          "score",
          [](const PyModel& s,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& pts) {
            auto r = score::score_cloud(s.model, cloud_of(pts), s.opts);
            py::dict d;
            d["scene"] = py::make_tuple(r.scene[0], r.scene[1], r.scene[2]);
            d["queries"] = from_points(r.queries);
            d["p"] = from_tensor(r.p_c);
            return d;
          },
          py::arg("points"))
      .def(
          "anomaly_map",
          [](const PyModel& s,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& pts) {
            auto map = score::anomaly_map(s.model, cloud_of(pts), s.opts);
            return from_tensor(map.point_p);
          },
          py::arg("points"));

  m.def(
      "load_model",
      [](const std::string& path) { return PyModel{net::load_checkpoint(path).model, {}}; },
      py::arg("path"));

  m.def(
      "train_run",
      [](const std::string& config_text, const std::string& checkpoint_out) {
        auto kv = io::KvConfig::parse_string(config_text);
        auto app = config::parse_app_config(kv);
        auto result = train::run_training(app.train);
        if (!checkpoint_out.empty())
          net::save_checkpoint(checkpoint_out, result.model, &result.adam);
        py::dict d;
        d["acc_c"] = result.report.final_eval.acc_c;
        d["acc_a"] = result.report.final_eval.acc_a;
        d["metrics_csv"] = result.report.metrics_csv();
        return d;
      },
      py::arg("config_text"), py::arg("checkpoint_out") = std::string(),
      "Runs the adversarial proxy-classification training from config text.");

  m.def("adversary_lower_bound", &train::adversary_lower_bound, py::arg("u_c"), py::arg("u_a"),
        py::arg("filtered"), py::arg("n_real"));

  m.def("default_config", &config::default_config_text);

  m.def(
      "save_xyz",
      [](const std::string& path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& pts) {
        io::save_xyz(path, cloud_of(pts));
      },
      py::arg("path"), py::arg("points"));

  m.def(
      "load_cloud",
      [](const std::string& path) { return from_points(io::load_cloud(path).points); },
      py::arg("path"));
}
