#include "pcreal/config.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace pcreal::config {

namespace {

class Reader {
 public:
  explicit Reader(const io::KvConfig& kv) : kv_(kv) {}

  bool has(const std::string& key) {
    if (kv_.has(key)) {
      consumed_.insert(key);
      return true;
    }
    return false;
  }

  std::string str(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    return kv_.get_or(key, fallback);
  }

  long i64(const std::string& key, long fallback) {
    consumed_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      long r = std::stol(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw std::runtime_error("configuration key '" + key + "': expected integer, got '" + *v +
                               "'");
    }
  }

  double f64(const std::string& key, double fallback) {
    consumed_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      double r = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return r;
    } catch (...) {
      throw std::runtime_error("configuration key '" + key + "': expected number, got '" + *v +
                               "'");
    }
  }

  bool flag(const std::string& key, bool fallback) {
    consumed_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw std::runtime_error("configuration key '" + key + "': expected true/false, got '" + *v +
                             "'");
  }

  std::vector<double> f64_list(const std::string& key, std::vector<double> fallback) {
    consumed_.insert(key);
    const std::string* v = kv_.find(key);
    if (!v) return fallback;
    std::vector<double> out;
    std::istringstream in(*v);
    std::string cell;
    while (std::getline(in, cell, ',')) {
      try {
        out.push_back(std::stod(cell));
      } catch (...) {
        throw std::runtime_error("configuration key '" + key + "': bad number '" + cell + "'");
      }
    }
    if (out.empty())
      throw std::runtime_error("configuration key '" + key + "': empty list");
    return out;
  }

  /// Rejects any key never consumed, naming it exactly.
  void finish() const {
    for (const auto& [key, value] : kv_.entries) {
      (void)value;
      if (!consumed_.count(key))
        throw std::runtime_error("unknown configuration key '" + key + "'");
    }
  }

 private:
  const io::KvConfig& kv_;
  std::set<std::string> consumed_;
};

void read_scatter(Reader& r, const std::string& p, pcgen::ScatterParams& s) {
  s.min_objects = static_cast<int>(r.i64(p + "min_objects", s.min_objects));
  s.max_objects = static_cast<int>(r.i64(p + "max_objects", s.max_objects));
  s.box_fraction = r.f64(p + "box_fraction", s.box_fraction);
  s.box_half_min = r.f64(p + "box_half_min", s.box_half_min);
  s.box_half_max = r.f64(p + "box_half_max", s.box_half_max);
  s.sphere_radius_min = r.f64(p + "sphere_radius_min", s.sphere_radius_min);
  s.sphere_radius_max = r.f64(p + "sphere_radius_max", s.sphere_radius_max);
  s.placement_radius_min = r.f64(p + "placement_radius_min", s.placement_radius_min);
  s.placement_radius_max = r.f64(p + "placement_radius_max", s.placement_radius_max);
  s.ground_z = r.f64(p + "ground_z", s.ground_z);
}

/// Reads dataset.N.*; base, when given, supplies the defaults (overlay on a
/// built-in support set), otherwise the section defines a dataset from
/// scratch.
pcgen::DatasetSpec read_dataset(Reader& r, int index, const pcgen::DatasetSpec* base) {
  const std::string p = "dataset." + std::to_string(index) + ".";
  pcgen::DatasetSpec d;
  if (base) d = *base;
  d.id = index;
  d.name = r.str(p + "name", base ? d.name : "dataset" + std::to_string(index));
  d.category = category_from_name(
      r.str(p + "category", base ? category_name(d.category) : "real"));
  d.kind = r.str(p + "kind", base ? d.kind : "real_surrogate");
  d.sample_count = r.i64(p + "sample_count", d.sample_count);
  if (d.kind == "real_surrogate") {
    bool fresh = !base || base->kind != "real_surrogate";
    if (r.has(p + "style"))
      d.real = pcgen::real_surrogate_style(static_cast<int>(r.i64(p + "style", 0)));
    else if (fresh)
      d.real = pcgen::real_surrogate_style(0);
    d.real.range_noise_sigma = r.f64(p + "noise_sigma", d.real.range_noise_sigma);
    d.real.dropout_base = r.f64(p + "dropout_base", d.real.dropout_base);
    d.real.dropout_scale = r.f64(p + "dropout_scale", d.real.dropout_scale);
    d.real.jitter_levels = static_cast<int>(r.i64(p + "jitter_levels", d.real.jitter_levels));
    read_scatter(r, p + "scene.", d.real.scene);
  } else if (d.kind == "geometric_set") {
    bool fresh = !base || base->kind != "geometric_set";
    if (r.has(p + "style"))
      d.geo = pcgen::synthetic_scene_style(static_cast<int>(r.i64(p + "style", 1)));
    else if (fresh)
      d.geo = pcgen::synthetic_scene_style(1);
    read_scatter(r, p + "scene.", d.geo);
  } else {
    d.misc.ramp_d_min = r.f64(p + "ramp_d_min", d.misc.ramp_d_min);
    d.misc.ramp_d_max = r.f64(p + "ramp_d_max", d.misc.ramp_d_max);
    d.misc.noise_sigma_min = r.f64(p + "noise_sigma_min", d.misc.noise_sigma_min);
    d.misc.noise_sigma_max = r.f64(p + "noise_sigma_max", d.misc.noise_sigma_max);
    d.misc.blob_sigma_min = r.f64(p + "blob_sigma_min", d.misc.blob_sigma_min);
    d.misc.blob_sigma_max = r.f64(p + "blob_sigma_max", d.misc.blob_sigma_max);
    d.misc.blob_points = static_cast<int>(r.i64(p + "blob_points", d.misc.blob_points));
    d.misc.patch_base_raytraced =
        r.flag(p + "patch_base_raytraced", d.misc.patch_base_raytraced);
    read_scatter(r, p + "patch_scene.", d.misc.patch_scene);
  }
  return d;
}

}  // namespace

AppConfig parse_app_config(const io::KvConfig& kv) {
  Reader r(kv);
  AppConfig app;
  train::TrainConfig& t = app.train;

  t.seed = static_cast<std::uint64_t>(r.i64("seed", static_cast<long>(t.seed)));
  t.threads = static_cast<int>(r.i64("threads", t.threads));

  t.pattern.rows = static_cast<int>(r.i64("pattern.rows", t.pattern.rows));
  t.pattern.cols = static_cast<int>(r.i64("pattern.cols", t.pattern.cols));
  t.pattern.elevation_min =
      deg_to_rad(r.f64("pattern.elevation_min_deg", t.pattern.elevation_min * 180.0 / kPi));
  t.pattern.elevation_max =
      deg_to_rad(r.f64("pattern.elevation_max_deg", t.pattern.elevation_max * 180.0 / kPi));
  t.pattern.azimuth_span =
      deg_to_rad(r.f64("pattern.azimuth_span_deg", t.pattern.azimuth_span * 180.0 / kPi));
  t.pattern.max_range = r.f64("pattern.max_range", t.pattern.max_range);

  t.steps = r.i64("train.steps", t.steps);
  t.batch_size = static_cast<int>(r.i64("train.batch_size", t.batch_size));
  t.lambda = static_cast<float>(r.f64("train.lambda", t.lambda));
  t.eval_every = r.i64("train.eval_every", t.eval_every);
  t.eval_clouds_per_category =
      static_cast<int>(r.i64("train.eval_clouds_per_category", t.eval_clouds_per_category));
  t.final_eval_clouds_per_category = static_cast<int>(
      r.i64("train.final_eval_clouds_per_category", t.final_eval_clouds_per_category));
  t.max_points = static_cast<int>(r.i64("train.max_points", t.max_points));

  t.adam.lr0 = r.f64("adam.lr", t.adam.lr0);
  t.adam.beta1 = r.f64("adam.beta1", t.adam.beta1);
  t.adam.beta2 = r.f64("adam.beta2", t.adam.beta2);
  t.adam.eps = r.f64("adam.eps", t.adam.eps);
  t.adam.t_warm = r.i64("adam.warmup_steps", t.adam.t_warm);
  t.adam.gamma = r.f64("adam.decay_gamma", t.adam.gamma);
  t.adam.t_decay = r.i64("adam.decay_steps", t.adam.t_decay);

  // dataset.count (or a dataset.0.name section) replaces the built-in seven
  // support sets; otherwise dataset.N.* keys overlay the defaults in place
  long n_datasets = r.i64("dataset.count", -1);
  if (n_datasets >= 0 || kv.has("dataset.0.name")) {
    if (n_datasets < 0) {
      n_datasets = 0;
      while (kv.has("dataset." + std::to_string(n_datasets) + ".name")) ++n_datasets;
    }
    t.datasets.clear();
    for (long i = 0; i < n_datasets; ++i)
      t.datasets.push_back(read_dataset(r, static_cast<int>(i), nullptr));
  } else {
    for (std::size_t i = 0; i < t.datasets.size(); ++i)
      t.datasets[i] = read_dataset(r, static_cast<int>(i), &t.datasets[i]);
  }

  app.generate_count = r.i64("generate.count", app.generate_count);
  app.generate_format = r.str("generate.format", app.generate_format);
  app.generate_datasets = r.str("generate.datasets", app.generate_datasets);

  app.sweep_lambdas = r.f64_list("sweep.lambdas", app.sweep_lambdas);
  app.sweep_sigmas = r.f64_list("sweep.sigmas", app.sweep_sigmas);
  app.sweep_clouds = static_cast<int>(r.i64("sweep.clouds", app.sweep_clouds));

  app.eval_scans = static_cast<int>(r.i64("eval.scans", app.eval_scans));
  app.eval_factor = static_cast<int>(r.i64("eval.factor", app.eval_factor));
  app.score_max_points = static_cast<int>(r.i64("score.max_points", app.score_max_points));

  r.finish();
  return app;
}

std::string default_config_text() {
  AppConfig app;
  const train::TrainConfig& t = app.train;
  std::ostringstream out;
  out << "# pcreal configuration (key = value). Unknown keys are rejected.\n";
  out << "seed = " << t.seed << "\n";
  out << "threads = " << t.threads << "          # 0 = all cores\n\n";
  out << "pattern.rows = " << t.pattern.rows << "\n";
  out << "pattern.cols = " << t.pattern.cols << "\n";
  out << "pattern.elevation_min_deg = " << t.pattern.elevation_min * 180.0 / kPi << "\n";
  out << "pattern.elevation_max_deg = " << t.pattern.elevation_max * 180.0 / kPi << "\n";
  out << "pattern.azimuth_span_deg = 360\n";
  out << "pattern.max_range = " << t.pattern.max_range << "\n\n";
  out << "train.steps = " << t.steps << "\n";
  out << "train.batch_size = " << t.batch_size << "\n";
  out << "train.lambda = " << t.lambda << "\n";
  out << "train.eval_every = " << t.eval_every << "\n";
  out << "train.eval_clouds_per_category = " << t.eval_clouds_per_category << "\n";
  out << "train.final_eval_clouds_per_category = " << t.final_eval_clouds_per_category << "\n";
  out << "train.max_points = " << t.max_points << "\n\n";
  out << "adam.lr = " << t.adam.lr0 << "\n";
  out << "adam.warmup_steps = " << t.adam.t_warm << "\n";
  out << "adam.decay_gamma = " << t.adam.gamma << "\n";
  out << "adam.decay_steps = " << t.adam.t_decay << "\n\n";
  out << "# Datasets default to the built-in seven support sets (2 real_surrogate,\n";
  out << "# 2 geometric_set, misc1, misc2, misc3). Define dataset.N.* to replace them;\n";
  out << "# see the README for the per-kind keys.\n\n";
  out << "generate.count = " << app.generate_count << "\n";
  out << "generate.format = " << app.generate_format << "\n";
  out << "generate.datasets = " << app.generate_datasets << "\n\n";
  out << "sweep.lambdas = 0,0.3,1\n";
  out << "sweep.sigmas = 0,0.1,1,3,10\n";
  out << "sweep.clouds = " << app.sweep_clouds << "\n\n";
  out << "eval.scans = " << app.eval_scans << "\n";
  out << "eval.factor = " << app.eval_factor << "\n";
  out << "score.max_points = " << app.score_max_points << "\n";
  return out.str();
}

}  // namespace pcreal::config
