#pragma once

#include <string>
#include <vector>

#include "pcreal/io.hpp"
#include "pcreal/train.hpp"

namespace pcreal::config {

/// Everything the CLI subcommands consume, resolved from the key=value file
/// plus overrides. Unknown keys are rejected with the exact key name.
struct AppConfig {
  train::TrainConfig train;  // datasets + pattern + optimizer + seeds

  // generate
  long generate_count = 10;
  std::string generate_format = "xyz";  // xyz | bin | ply
  std::string generate_datasets = "all";

  // sweeps
  std::vector<double> sweep_lambdas{0.0, 0.3, 1.0};
  std::vector<double> sweep_sigmas{0.0, 0.1, 1.0, 3.0, 10.0};
  int sweep_clouds = 100;

  // baseline evaluation
  int eval_scans = 50;
  int eval_factor = 4;

  // scoring
  int score_max_points = 8192;
};

AppConfig parse_app_config(const io::KvConfig& kv);

/// The built-in defaults rendered as a config file (documents the schema).
std::string default_config_text();

}  // namespace pcreal::config
