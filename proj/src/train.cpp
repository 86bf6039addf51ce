#include "pcreal/train.hpp"

#include <algorithm>
#include <stdexcept>

#include "pcreal/io.hpp"
#include "pcreal/parallel.hpp"

namespace pcreal::train {

namespace {

// salts for independent seed streams
constexpr std::uint64_t kSaltBatch = 0xB47C;
constexpr std::uint64_t kSaltEval = 0xE7A1;
constexpr std::uint64_t kSaltDropC = 0xD0C;
constexpr std::uint64_t kSaltDropA = 0xD0A;
constexpr std::uint64_t kSaltSubsample = 0x5AB5;
constexpr std::uint64_t kSaltInit = 0x1417;

std::vector<const pcgen::DatasetSpec*> category_members(
    const std::vector<pcgen::DatasetSpec>& specs, Category cat) {
  std::vector<const pcgen::DatasetSpec*> out;
  for (const auto& s : specs)
    if (s.category == cat) out.push_back(&s);
  return out;
}

int majority_vote(const std::vector<long>& counts) {
  int best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i)
    if (counts[i] > counts[best]) best = static_cast<int>(i);
  return best;
}

struct CloudGrad {
  net::MetricModel grads;
  double loss_c = 0.0, loss_a = 0.0;
};

/// Forward + losses + backward for one labeled cloud. Pure; runs on worker
/// threads.
void cloud_pass(const net::MetricModel& model, const TrainConfig& cfg, const BatchItem& item,
                std::uint64_t drop_seed_c, std::uint64_t drop_seed_a, std::uint64_t sub_seed,
                CloudGrad& out) {
  std::vector<Vec3> pts =
      spatial::hash_subsample(item.cloud.points, cfg.max_points, sub_seed);

  net::ExtractorTrace<float> tr;
  net::extractor_forward<float>(pts, model, tr);

  const float slope = model.cfg.leaky_slope;
  auto cls = net::head_forward(tr.z, model.cls_hidden, model.cls_out, slope, true, drop_seed_c);
  auto adv = net::head_forward(tr.z, model.adv_hidden, model.adv_out, slope, true, drop_seed_a);

  double w_adv = item.category == static_cast<int>(Category::Real) ? 1.0 : 0.0;
  auto ce_c = net::weighted_cross_entropy(cls.logits, item.category, 1.0);
  auto ce_a = net::weighted_cross_entropy(adv.logits, item.dataset, w_adv);
  out.loss_c = ce_c.loss;
  out.loss_a = ce_a.loss;

  out.grads = net::MetricModel::zeros_like(model);
  Tensor dz_c = net::head_backward(cls, tr.z, model.cls_hidden, model.cls_out, slope, ce_c.dlogits,
                                   out.grads.cls_hidden, out.grads.cls_out);
  // theta_A trains on the non-reversed gradient; only the path into the
  // extractor goes through the reversal node
  Tensor dz_a = net::head_backward(adv, tr.z, model.adv_hidden, model.adv_out, slope, ce_a.dlogits,
                                   out.grads.adv_hidden, out.grads.adv_out);
  Tensor dz_rev = net::gradient_reversal_backward(dz_a, model.cfg.lambda);
  for (std::size_t i = 0; i < dz_c.v.size(); ++i) dz_c.v[i] += dz_rev.v[i];

  net::extractor_backward(tr, model, dz_c, out.grads);
}

void accumulate_scaled(net::MetricModel& into, const net::MetricModel& from, float scale) {
  std::vector<Tensor*> dst;
  std::vector<const Tensor*> src;
  into.visit([&](const std::string&, Tensor& t) { dst.push_back(&t); });
  from.visit([&](const std::string&, const Tensor& t) { src.push_back(&t); });
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i]->v.size(); ++j) dst[i]->v[j] += scale * src[i]->v[j];
}

}  // namespace

net::ModelConfig TrainConfig::model_config() const {
  net::ModelConfig mc;
  int max_id = 0;
  for (const auto& d : datasets) max_id = std::max(max_id, d.id);
  mc.num_datasets = max_id + 1;
  mc.lambda = lambda;
  return mc;
}

void TrainConfig::validate() const {
  pcgen::validate_support_sets(datasets);
  pattern.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  if (max_points < 1) throw std::invalid_argument("max_points must be >= 1");
  bool have[3] = {false, false, false};
  for (const auto& d : datasets) have[static_cast<int>(d.category)] = true;
  if (!have[0] || !have[1] || !have[2])
    throw std::invalid_argument("need at least one dataset per category");
}

BatchItem make_batch_item(const TrainConfig& cfg, long step, int slot) {
  std::uint64_t s = derive_seed(derive_seed(cfg.seed, kSaltBatch),
                                static_cast<std::uint64_t>(step) * cfg.batch_size + slot);
  SplitMix64 rng(s);
  auto cat = static_cast<Category>(rng.next_below(3));
  auto members = category_members(cfg.datasets, cat);
  const pcgen::DatasetSpec* spec = members[rng.next_below(members.size())];
  BatchItem item;
  item.cloud = pcgen::generate_sample(*spec, cfg.pattern, rng.next_u64());
  item.category = static_cast<int>(spec->category);
  item.dataset = spec->id;
  return item;
}

StepLosses train_step(net::MetricModel& model, net::AdamState& adam, const TrainConfig& cfg,
                      const std::vector<BatchItem>& batch) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) throw std::invalid_argument("train_step: empty batch");
  for (const auto& item : batch) {
    if (item.dataset < 0 || item.dataset >= model.cfg.num_datasets)
      throw std::invalid_argument("train_step: unknown dataset id " +
                                  std::to_string(item.dataset));
  }
  const long step = adam.t;  // steps are 0-based here; Adam's t advances on update

  std::vector<CloudGrad> per_cloud(b);
  parallel_for(b, cfg.threads, [&](std::size_t i) {
    std::uint64_t key = static_cast<std::uint64_t>(step) * cfg.batch_size + i;
    cloud_pass(model, cfg, batch[i], derive_seed(derive_seed(cfg.seed, kSaltDropC), key),
               derive_seed(derive_seed(cfg.seed, kSaltDropA), key),
               derive_seed(derive_seed(cfg.seed, kSaltSubsample), key), per_cloud[i]);
  });

  // fixed-order reduction keeps runs bit-reproducible across thread counts
  net::MetricModel grads = net::MetricModel::zeros_like(model);
  StepLosses losses;
  const float inv_b = 1.0f / static_cast<float>(b);
  for (int i = 0; i < b; ++i) {
    accumulate_scaled(grads, per_cloud[i].grads, inv_b);
    losses.loss_c += per_cloud[i].loss_c;
    losses.loss_a += per_cloud[i].loss_a;
  }
  losses.loss_c /= b;
  losses.loss_a /= b;

  net::adam_step(model, grads, adam, cfg.adam);
  return losses;
}

EvalResult evaluate(const net::MetricModel& model, const TrainConfig& cfg,
                    std::uint64_t eval_salt, int clouds_per_category) {
  if (clouds_per_category < 1) throw std::invalid_argument("evaluate: empty evaluation set");
  const int u_a = model.cfg.num_datasets;

  struct Labeled {
    const pcgen::DatasetSpec* spec;
    std::uint64_t seed;
  };
  std::vector<Labeled> jobs;
  for (int c = 0; c < 3; ++c) {
    auto members = category_members(cfg.datasets, static_cast<Category>(c));
    if (members.empty()) continue;
    for (int i = 0; i < clouds_per_category; ++i) {
      const auto* spec = members[i % members.size()];
      std::uint64_t s = derive_seed(derive_seed(cfg.seed, kSaltEval ^ eval_salt),
                                    (std::uint64_t(c) << 32) | std::uint64_t(i));
      jobs.push_back({spec, s});
    }
  }

  struct Pred {
    int true_c, true_a, pred_c, pred_a;
  };
  std::vector<Pred> preds(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    PointCloud pc = pcgen::generate_sample(*jobs[i].spec, cfg.pattern, jobs[i].seed);
    std::vector<Vec3> pts = spatial::hash_subsample(
        pc.points, cfg.max_points, derive_seed(jobs[i].seed, kSaltSubsample));
    net::ExtractorTrace<float> tr;
    net::extractor_forward<float>(pts, model, tr);
    auto cls =
        net::head_forward(tr.z, model.cls_hidden, model.cls_out, model.cfg.leaky_slope, false, 0);
    auto adv =
        net::head_forward(tr.z, model.adv_hidden, model.adv_out, model.cfg.leaky_slope, false, 0);

    // scene score S = mean over query rows; prediction = argmax component
    const int q = cls.probs.d0;
    double s[3] = {0, 0, 0};
    for (int r = 0; r < q; ++r)
      for (int c = 0; c < 3; ++c) s[c] += cls.probs.at(r, c);
    int pred_c = 0;
    for (int c = 1; c < 3; ++c)
      if (s[c] > s[pred_c]) pred_c = c;

    // cloud-level dataset prediction: majority of per-query argmaxes
    std::vector<long> votes(u_a, 0);
    for (int r = 0; r < q; ++r) {
      int am = 0;
      for (int c = 1; c < u_a; ++c)
        if (adv.probs.at(r, c) > adv.probs.at(r, am)) am = c;
      ++votes[am];
    }
    preds[i] = {static_cast<int>(jobs[i].spec->category), jobs[i].spec->id, pred_c,
                majority_vote(votes)};
  });

  EvalResult res;
  res.confusion_c.assign(3, std::vector<long>(3, 0));
  res.confusion_a.assign(u_a, std::vector<long>(u_a, 0));
  long correct_c = 0, correct_a = 0;
  for (const auto& p : preds) {
    ++res.n_clouds;
    res.confusion_c[p.true_c][p.pred_c] += 1;
    if (p.pred_c == p.true_c) ++correct_c;
    if (p.true_c == static_cast<int>(Category::Real)) {
      ++res.n_real;
      res.confusion_a[p.true_a][p.pred_a] += 1;
      if (p.pred_a == p.true_a) ++correct_a;
    }
  }
  res.acc_c = res.n_clouds ? double(correct_c) / res.n_clouds : 0.0;
  res.acc_a = res.n_real ? double(correct_a) / res.n_real : 0.0;
  return res;
}

TrainResult run_training(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  TrainResult result;
  result.model = net::MetricModel::create(cfg.model_config(), derive_seed(cfg.seed, kSaltInit));
  result.adam = net::AdamState::zeros_like(result.model);

  for (long step = 0; step < cfg.steps; ++step) {
    std::vector<BatchItem> batch(cfg.batch_size);
    parallel_for(batch.size(), cfg.threads,
                 [&](std::size_t i) { batch[i] = make_batch_item(cfg, step, static_cast<int>(i)); });
    StepLosses losses = train_step(result.model, result.adam, cfg, batch);

    StepRecord rec;
    rec.step = step + 1;
    rec.loss_c = losses.loss_c;
    rec.loss_a = losses.loss_a;
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < cfg.steps) {
      EvalResult ev = evaluate(result.model, cfg, 1, cfg.eval_clouds_per_category);
      rec.has_eval = true;
      rec.acc_c = ev.acc_c;
      rec.acc_a = ev.acc_a;
    }
    result.report.steps.push_back(rec);
    if (progress) progress(rec);
  }

  result.report.final_eval = evaluate(result.model, cfg, 2, cfg.final_eval_clouds_per_category);
  if (!result.report.steps.empty()) {
    auto& last = result.report.steps.back();
    last.has_eval = true;
    last.acc_c = result.report.final_eval.acc_c;
    last.acc_a = result.report.final_eval.acc_a;
  }
  return result;
}

std::string TrainReport::metrics_csv() const {
  std::string out = "step,loss_c,loss_a,acc_c,acc_a\n";
  for (const auto& r : steps) {
    io::append_csv_row(out, {std::to_string(r.step), io::format_float(r.loss_c),
                             io::format_float(r.loss_a),
                             r.has_eval ? io::format_float(r.acc_c) : std::string(),
                             r.has_eval ? io::format_float(r.acc_a) : std::string()});
  }
  return out;
}

std::string TrainReport::confusion_csv(const std::vector<std::vector<long>>& m) {
  std::string out;
  for (const auto& row : m) {
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (long v : row) cells.push_back(std::to_string(v));
    io::append_csv_row(out, cells);
  }
  return out;
}

std::vector<SweepEntry> lambda_sweep(const TrainConfig& base, const std::vector<double>& lambdas,
                                     const ProgressFn& progress) {
  if (lambdas.size() < 2) throw std::invalid_argument("lambda_sweep: need at least two values");
  std::vector<SweepEntry> entries;
  for (double l : lambdas) {
    TrainConfig cfg = base;
    cfg.lambda = static_cast<float>(l);
    TrainResult r = run_training(cfg, progress);
    entries.push_back({l, r.report.final_eval.acc_c, r.report.final_eval.acc_a});
  }
  return entries;
}

std::string lambda_sweep_csv(const std::vector<SweepEntry>& entries) {
  std::string out = "lambda,acc_c,acc_a\n";
  for (const auto& e : entries)
    io::append_csv_row(out, {io::format_float(e.lambda), io::format_float(e.acc_c),
                             io::format_float(e.acc_a)});
  return out;
}

double adversary_lower_bound(int u_c, int u_a, bool filtered, int n_real) {
  if (u_c < 1 || u_a < u_c) throw std::invalid_argument("adversary_lower_bound: need U_A >= U_C >= 1");
  if (n_real < 1) throw std::invalid_argument("adversary_lower_bound: need n_real >= 1");
  return filtered ? 1.0 / n_real : double(u_c) / u_a;
}

}  // namespace pcreal::train
