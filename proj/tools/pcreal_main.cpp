#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "pcreal/config.hpp"
#include "pcreal/eval.hpp"
#include "pcreal/io.hpp"
#include "pcreal/parallel.hpp"
#include "pcreal/score.hpp"
#include "pcreal/train.hpp"

#ifndef PCREAL_VERSION
#define PCREAL_VERSION "0.1.0"
#endif

extern char** environ;

namespace fs = std::filesystem;
using namespace pcreal;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "pcreal_out";
  std::vector<std::string> sets;
  long seed = -1;     // -1: keep config value
  int threads = -1;   // -1: keep config value
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "configuration file (key = value)");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--set", o.sets, "override a configuration key, key=value")->take_all();
  cmd->add_option("--seed", o.seed, "override the global seed");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

/// Environment overrides: PCREAL_TRAIN__STEPS=200 sets train.steps = 200
/// (prefix stripped, lowercased, double underscore becomes a dot).
void apply_env(io::KvConfig& kv) {
  for (char** e = environ; *e; ++e) {
    std::string entry(*e);
    if (entry.rfind("PCREAL_", 0) != 0) continue;
    auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(7, eq - 7);
    std::string value = entry.substr(eq + 1);
    std::string mapped;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (key[i] == '_' && i + 1 < key.size() && key[i + 1] == '_') {
        mapped += '.';
        ++i;
      } else {
        mapped += static_cast<char>(std::tolower(static_cast<unsigned char>(key[i])));
      }
    }
    kv.set(mapped, value);
  }
}

io::KvConfig resolve_kv(const CommonOpts& o) {
  io::KvConfig kv;
  if (!o.config_path.empty()) kv = io::KvConfig::parse_file(o.config_path);
  apply_env(kv);
  for (const auto& s : o.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed >= 0) kv.set("seed", std::to_string(o.seed));
  if (o.threads >= 0) kv.set("threads", std::to_string(o.threads));
  return kv;
}

void write_run_metadata(const std::string& out_dir, const std::string& command,
                        const io::KvConfig& kv, const config::AppConfig& app) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = PCREAL_VERSION;
  j["seed"] = app.train.seed;
  j["threads"] = app.train.threads;
  std::string canonical = kv.canonical();
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(io::fnv1a64(canonical)));
  j["config_hash"] = hash;
  j["config"] = canonical;  // the full override set; reruns need nothing else
  io::write_text_file(out_dir + "/run_metadata.json", j.dump(2) + "\n");
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

io::CloudFormat parse_format(const std::string& f) {
  if (f == "auto") return io::CloudFormat::Auto;
  if (f == "xyz") return io::CloudFormat::Xyz;
  if (f == "bin3") return io::CloudFormat::Bin3;
  if (f == "bin4") return io::CloudFormat::Bin4;
  throw std::runtime_error("unknown input format '" + f + "'");
}

int cmd_generate(const CommonOpts& opts) {
  auto kv = resolve_kv(opts);
  auto app = config::parse_app_config(kv);
  fs::create_directories(opts.out_dir);
  write_run_metadata(opts.out_dir, "generate", kv, app);

  std::vector<const pcgen::DatasetSpec*> selected;
  if (app.generate_datasets == "all") {
    for (const auto& d : app.train.datasets) selected.push_back(&d);
  } else {
    std::istringstream in(app.generate_datasets);
    std::string name;
    while (std::getline(in, name, ',')) {
      const pcgen::DatasetSpec* found = nullptr;
      for (const auto& d : app.train.datasets)
        if (d.name == name) found = &d;
      if (!found) throw std::runtime_error("generate.datasets names unknown dataset '" + name + "'");
      selected.push_back(found);
    }
  }

  std::string ext = app.generate_format == "bin" ? "bin" : app.generate_format;
  if (ext != "xyz" && ext != "bin" && ext != "ply")
    throw std::runtime_error("generate.format must be xyz, bin or ply");

  std::string manifest = "filename,dataset_id,dataset_name,category,seed\n";
  for (const auto* spec : selected) {
    long count = app.generate_count;
    if (spec->sample_count >= 0) count = std::min<long>(count, spec->sample_count);
    for (long i = 0; i < count; ++i) {
      std::uint64_t seed =
          derive_seed(app.train.seed, (std::uint64_t(spec->id) << 32) | std::uint64_t(i));
      PointCloud pc = pcgen::generate_sample(*spec, app.train.pattern, seed);
      char fname[256];
      std::snprintf(fname, sizeof(fname), "%s_%04ld.%s", spec->name.c_str(), i, ext.c_str());
      io::save_cloud(opts.out_dir + "/" + fname, pc, io::CloudFormat::Auto);
      io::append_csv_row(manifest, {fname, std::to_string(spec->id), spec->name,
                                    category_name(spec->category), std::to_string(seed)});
    }
  }
  io::write_text_file(opts.out_dir + "/manifest.csv", manifest);
  std::cout << "wrote manifest with "
            << std::count(manifest.begin(), manifest.end(), '\n') - 1 << " samples under "
            << opts.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  auto kv = resolve_kv(opts);
  auto app = config::parse_app_config(kv);
  fs::create_directories(opts.out_dir);
  write_run_metadata(opts.out_dir, "train", kv, app);

  auto t0 = std::chrono::steady_clock::now();
  auto result = train::run_training(app.train, [&](const train::StepRecord& r) {
    if (r.has_eval || r.step % 50 == 0 || r.step == 1) {
      auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("step %5ld  loss_c %.4f  loss_a %.4f", r.step, r.loss_c, r.loss_a);
      if (r.has_eval) std::printf("  acc_c %.3f  acc_a %.3f", r.acc_c, r.acc_a);
      std::printf("  [%.0fs]\n", dt);
      std::fflush(stdout);
    }
  });

  net::save_checkpoint(opts.out_dir + "/checkpoint.pcrl", result.model, &result.adam);
  io::write_text_file(opts.out_dir + "/metrics.csv", result.report.metrics_csv());
  io::write_text_file(opts.out_dir + "/confusion_c.csv",
                      train::TrainReport::confusion_csv(result.report.final_eval.confusion_c));
  io::write_text_file(opts.out_dir + "/confusion_a.csv",
                      train::TrainReport::confusion_csv(result.report.final_eval.confusion_a));
  std::printf("final: acc_c %.4f  acc_a %.4f (filtered lower bound %.3f)\n",
              result.report.final_eval.acc_c, result.report.final_eval.acc_a,
              train::adversary_lower_bound(3, result.model.cfg.num_datasets, true, 2));
  return 0;
}

int cmd_score(const CommonOpts& opts, const std::vector<std::string>& inputs,
              const std::string& model_path, const std::string& format) {
  auto kv = resolve_kv(opts);
  auto app = config::parse_app_config(kv);
  fs::create_directories(opts.out_dir);
  write_run_metadata(opts.out_dir, "score", kv, app);

  auto ck = net::load_checkpoint(model_path);
  score::ScoreOptions sopts;
  sopts.max_points = app.score_max_points;
  for (const auto& input : inputs) {
    PointCloud pc = io::load_cloud(input, parse_format(format));
    auto s = score::score_cloud(ck.model, pc, sopts);
    io::write_text_file(opts.out_dir + "/" + stem_of(input) + "_scores.json",
                        score::scores_json(s));
    io::write_text_file(opts.out_dir + "/" + stem_of(input) + "_scores.csv",
                        score::scores_csv(s));
    const char* names[3] = {"real", "synthetic", "misc"};
    int am = 0;
    for (int c = 1; c < 3; ++c)
      if (s.scene[c] > s.scene[am]) am = c;
    std::printf("%s: real %.4f  synthetic %.4f  misc %.4f  -> %s\n", input.c_str(), s.scene[0],
                s.scene[1], s.scene[2], names[am]);
  }
  return 0;
}

int cmd_anomaly(const CommonOpts& opts, const std::string& input, const std::string& model_path,
                const std::string& format) {
  auto kv = resolve_kv(opts);
  auto app = config::parse_app_config(kv);
  fs::create_directories(opts.out_dir);
  write_run_metadata(opts.out_dir, "anomaly", kv, app);

  auto ck = net::load_checkpoint(model_path);
  score::ScoreOptions sopts;
  sopts.max_points = app.score_max_points;
  PointCloud pc = io::load_cloud(input, parse_format(format));
  auto s = score::score_cloud(ck.model, pc, sopts);
  auto map = score::anomaly_map(ck.model, pc, s, 4);
  score::write_anomaly_ply(opts.out_dir + "/" + stem_of(input) + "_anomaly.ply", pc, map);
  io::write_text_file(opts.out_dir + "/" + stem_of(input) + "_scores.json",
                      score::scores_json(s));
  std::printf("%s: scene real %.4f; anomaly map written\n", input.c_str(), s.scene[0]);
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& kind, const std::string& model_path) {
  auto kv = resolve_kv(opts);
  auto app = config::parse_app_config(kv);
  fs::create_directories(opts.out_dir);
  write_run_metadata(opts.out_dir, "sweep-" + kind, kv, app);

  if (kind == "lambda") {
    auto entries = train::lambda_sweep(app.train, app.sweep_lambdas);
    io::write_text_file(opts.out_dir + "/lambda_sweep.csv", train::lambda_sweep_csv(entries));
    for (const auto& e : entries)
      std::printf("lambda %-6g acc_c %.4f  acc_a %.4f\n", e.lambda, e.acc_c, e.acc_a);
    return 0;
  }
  if (kind == "noise") {
    if (model_path.empty()) throw std::runtime_error("sweep --kind noise requires --model");
    auto ck = net::load_checkpoint(model_path);
    const pcgen::DatasetSpec* synthetic = nullptr;
    for (const auto& d : app.train.datasets)
      if (d.category == Category::Synthetic && !synthetic) synthetic = &d;
    if (!synthetic) throw std::runtime_error("no Synthetic dataset configured");
    auto rows = eval::noise_sweep(
        ck.model,
        [&](std::uint64_t seed) {
          return pcgen::generate_sample(*synthetic, app.train.pattern, seed);
        },
        app.sweep_sigmas, app.sweep_clouds, derive_seed(app.train.seed, 0x505E),
        app.score_max_points, app.train.threads);
    io::write_text_file(opts.out_dir + "/noise_sweep.csv", eval::noise_sweep_csv(rows));
    for (const auto& r : rows)
      std::printf("sigma %-6g S: real %.3f  synthetic %.3f  misc %.3f\n", r.sigma, r.mean[0],
                  r.mean[1], r.mean[2]);
    return 0;
  }
  throw std::runtime_error("sweep kind must be 'lambda' or 'noise'");
}

int cmd_eval(const CommonOpts& opts, const std::string& model_path) {
  auto kv = resolve_kv(opts);
  auto app = config::parse_app_config(kv);
  fs::create_directories(opts.out_dir);
  write_run_metadata(opts.out_dir, "eval", kv, app);

  auto ck = net::load_checkpoint(model_path);
  score::ScoreOptions sopts;
  sopts.max_points = app.score_max_points;
  const int f = app.eval_factor;
  const ScanPattern& hr = app.train.pattern;
  if (hr.rows % f != 0) throw std::runtime_error("eval.factor must divide pattern.rows");

  const pcgen::DatasetSpec* real = nullptr;
  for (const auto& d : app.train.datasets)
    if (d.category == Category::Real && !real) real = &d;
  if (!real) throw std::runtime_error("no Real dataset configured");

  std::string csv = "scan,chamfer,mse,mae,s_real_gt,s_real_bilinear\n";
  double mean_gt = 0, mean_up = 0, mean_mse = 0;
  struct Row {
    double cd, mse, mae, s_gt, s_up;
  };
  std::vector<Row> rows(app.eval_scans);
  parallel_for(app.eval_scans, app.train.threads, [&](std::size_t i) {
    std::uint64_t seed = derive_seed(derive_seed(app.train.seed, 0xE7A4), i);
    PointCloud gt_cloud = pcgen::generate_sample(*real, hr, seed);
    auto gt_img = eval::project(gt_cloud, hr).image;

    // decimate rows, then bring the vertical resolution back up
    eval::RangeImage lr;
    lr.rows = hr.rows / f;
    lr.cols = hr.cols;
    lr.range.resize(std::size_t(lr.rows) * lr.cols);
    lr.measured.resize(lr.range.size());
    lr.col_azimuth = gt_img.col_azimuth;
    lr.row_elevation.resize(lr.rows);
    for (int r = 0; r < lr.rows; ++r) {
      lr.row_elevation[r] = gt_img.row_elevation[r * f];
      for (int c = 0; c < lr.cols; ++c) {
        lr.range[std::size_t(r) * lr.cols + c] = gt_img.at(r * f, c);
        lr.measured[std::size_t(r) * lr.cols + c] = gt_img.is_measured(r * f, c);
      }
    }
    auto up_img = eval::bilinear_upsample(lr, f);
    PointCloud up_cloud = eval::unproject(up_img);

    Row row;
    row.cd = eval::chamfer(gt_cloud, up_cloud, 1);
    row.mse = eval::masked_error(up_img, gt_img, eval::ErrorKind::MSE);
    row.mae = eval::masked_error(up_img, gt_img, eval::ErrorKind::MAE);
    row.s_gt = score::score_cloud(ck.model, gt_cloud, sopts).scene[0];
    row.s_up = score::score_cloud(ck.model, up_cloud, sopts).scene[0];
    rows[i] = row;
  });
  for (int i = 0; i < app.eval_scans; ++i) {
    const Row& r = rows[i];
    io::append_csv_row(csv, {std::to_string(i), io::format_float(r.cd), io::format_float(r.mse),
                             io::format_float(r.mae), io::format_float(r.s_gt),
                             io::format_float(r.s_up)});
    mean_gt += r.s_gt;
    mean_up += r.s_up;
    mean_mse += r.mse;
  }
  io::write_text_file(opts.out_dir + "/baselines.csv", csv);
  std::printf("over %d scans: S_real GT %.4f vs bilinear %.4f; masked MSE %.5f\n", app.eval_scans,
              mean_gt / app.eval_scans, mean_up / app.eval_scans, mean_mse / app.eval_scans);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"pcreal: local realism metric for LiDAR-style point clouds"};
  cli.set_version_flag("--version", PCREAL_VERSION);
  cli.require_subcommand(1);

  CommonOpts opts;
  std::vector<std::string> inputs;
  std::string model_path, format = "auto", sweep_kind = "lambda";

  auto* c_generate = cli.add_subcommand("generate", "materialize dataset samples to disk");
  add_common(c_generate, opts);

  auto* c_train = cli.add_subcommand("train", "run the adversarial proxy-classification training");
  add_common(c_train, opts);

  auto* c_score = cli.add_subcommand("score", "score point-cloud files with a trained model");
  add_common(c_score, opts);
  c_score->add_option("--model", model_path, "checkpoint file")->required();
  c_score->add_option("--format", format, "input format: auto|xyz|bin3|bin4");
  c_score->add_option("inputs", inputs, "point-cloud files")->required();

  auto* c_anomaly = cli.add_subcommand("anomaly", "per-point anomaly map as colored PLY");
  add_common(c_anomaly, opts);
  c_anomaly->add_option("--model", model_path, "checkpoint file")->required();
  c_anomaly->add_option("--format", format, "input format: auto|xyz|bin3|bin4");
  c_anomaly->add_option("input", inputs, "point-cloud file")->required()->expected(1);

  auto* c_sweep = cli.add_subcommand("sweep", "lambda sweep (trains) or noise sweep (scores)");
  add_common(c_sweep, opts);
  c_sweep->add_option("--kind", sweep_kind, "lambda|noise");
  c_sweep->add_option("--model", model_path, "checkpoint (noise sweep)");

  auto* c_eval = cli.add_subcommand("eval", "baseline measures on bilinear up-sampling");
  add_common(c_eval, opts);
  c_eval->add_option("--model", model_path, "checkpoint file")->required();

  auto* c_config = cli.add_subcommand("config", "print the default configuration");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (c_generate->parsed()) return cmd_generate(opts);
    if (c_train->parsed()) return cmd_train(opts);
    if (c_score->parsed()) return cmd_score(opts, inputs, model_path, format);
    if (c_anomaly->parsed()) return cmd_anomaly(opts, inputs.at(0), model_path, format);
    if (c_sweep->parsed()) return cmd_sweep(opts, sweep_kind, model_path);
    if (c_eval->parsed()) return cmd_eval(opts, model_path);
    if (c_config->parsed()) {
      std::cout << config::default_config_text();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
