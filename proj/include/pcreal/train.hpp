#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcreal/net.hpp"
#include "pcreal/pcgen.hpp"

namespace pcreal::train {

struct TrainConfig {
  std::vector<pcgen::DatasetSpec> datasets = pcgen::default_support_sets();
  ScanPattern pattern;
  int batch_size = 8;
  long steps = 1500;
  float lambda = 0.3f;
  std::uint64_t seed = 1;
  long eval_every = 250;
  int eval_clouds_per_category = 15;        // quick evals during training
  int final_eval_clouds_per_category = 100;  // held-out report at the end
  int max_points = 8192;  // desk-scale subsample budget before the extractor
  int threads = 0;        // 0 = hardware concurrency
  net::AdamSchedule adam;

  net::ModelConfig model_config() const;
  void validate() const;
};

struct EvalResult {
  double acc_c = 0.0;
  double acc_a = 0.0;  // over Real-category clouds only
  long n_clouds = 0;
  long n_real = 0;
  std::vector<std::vector<long>> confusion_c;  // 3 x 3, rows = truth
  std::vector<std::vector<long>> confusion_a;  // U_A x U_A, Real clouds only
};

struct StepRecord {
  long step = 0;
  double loss_c = 0.0, loss_a = 0.0;
  bool has_eval = false;
  double acc_c = 0.0, acc_a = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  EvalResult final_eval;

  std::string metrics_csv() const;
  static std::string confusion_csv(const std::vector<std::vector<long>>& m);
};

struct TrainResult {
  net::MetricModel model;
  net::AdamState adam;
  TrainReport report;
};

struct BatchItem {
  PointCloud cloud;
  int category = 0;  // y_C
  int dataset = 0;   // y_A
};

/// Draws slot `slot` of step `step`: category uniform, then dataset uniform
/// within the category, sample seed derived from (seed, step, slot).
BatchItem make_batch_item(const TrainConfig& cfg, long step, int slot);

struct StepLosses {
  double loss_c = 0.0, loss_a = 0.0;
};

/// One combined backward pass over the batch (classifier weight 1, adversary
/// weight 1 iff the cloud's dataset is Real; adversary gradients reach the
/// extractor only through the reversal node) followed by one Adam step.
StepLosses train_step(net::MetricModel& model, net::AdamState& adam, const TrainConfig& cfg,
                      const std::vector<BatchItem>& batch);

/// Dropout off; category prediction is the argmax of the scene score S,
/// dataset prediction the majority of per-query adversary argmaxes.
EvalResult evaluate(const net::MetricModel& model, const TrainConfig& cfg,
                    std::uint64_t eval_salt, int clouds_per_category);

using ProgressFn = std::function<void(const StepRecord&)>;

TrainResult run_training(const TrainConfig& cfg, const ProgressFn& progress = nullptr);

struct SweepEntry {
  double lambda = 0.0;
  double acc_c = 0.0, acc_a = 0.0;
};

/// Independent trainings per lambda value with shared seeds.
std::vector<SweepEntry> lambda_sweep(const TrainConfig& base, const std::vector<double>& lambdas,
                                     const ProgressFn& progress = nullptr);
std::string lambda_sweep_csv(const std::vector<SweepEntry>& entries);

/// Best-case adversary accuracy: U_C/U_A unfiltered, 1/n_real with the
/// Real-only filter.
double adversary_lower_bound(int u_c, int u_a, bool filtered, int n_real);

}  // namespace pcreal::train
