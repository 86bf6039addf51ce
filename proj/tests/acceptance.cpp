// Acceptance suite: one pass/fail line per criterion, shared trained models,
// artifacts under --out. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcreal/config.hpp"
#include "pcreal/eval.hpp"
#include "pcreal/io.hpp"
#include "pcreal/parallel.hpp"
#include "pcreal/score.hpp"
#include "pcreal/train.hpp"

using namespace pcreal;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail, double seconds) {
  std::printf("criterion %2d: %s  (%.0fs)  %s\n", criterion, pass ? "PASS" : "FAIL", seconds,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Timer {
  Clock::time_point t0 = Clock::now();
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }
};

std::vector<Vec3> random_points(int n, std::uint64_t seed, double lo = -8, double hi = 8) {
  SplitMix64 rng(seed);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return pts;
}

// ---------------------------------------------------------------------------
// gradient-check plumbing (double instantiation of the production layer code)

constexpr double kStep = 1e-3;
constexpr double kRelTol = 1e-3;

double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-3});
}

struct Routing {
  std::vector<int> am1, am2;
  std::vector<char> signs;
};

struct LossAndRouting {
  double loss = 0;
  Routing routing;
};

LossAndRouting adversary_loss(const net::MetricModelT<double>& m, const std::vector<Vec3>& pts,
                              int target) {
  net::ExtractorTrace<double> tr;
  net::extractor_forward<double>(pts, m, tr);
  auto adv = net::head_forward<double>(tr.z, m.adv_hidden, m.adv_out, 0.2, false, 0);
  LossAndRouting r;
  r.loss = net::weighted_cross_entropy<double>(adv.logits, target, 1.0).loss;
  r.routing.am1 = tr.am1;
  r.routing.am2 = tr.am2;
  for (const auto& h : tr.h1)
    for (double v : h.v) r.routing.signs.push_back(v > 0);
  for (const auto& h : tr.h2)
    for (double v : h.v) r.routing.signs.push_back(v > 0);
  for (double v : adv.hidden.v) r.routing.signs.push_back(v > 0);
  return r;
}

bool same_routing(const Routing& a, const Routing& b) {
  return a.am1 == b.am1 && a.am2 == b.am2 && a.signs == b.signs;
}

// ---------------------------------------------------------------------------
// criterion 1: gradient-reversal contract on 20 random small models

void criterion_1() {
  Timer timer;
  bool pass = true;
  std::string detail;
  long checked = 0, skipped = 0;
  double worst = 0;

  for (int trial = 0; trial < 20 && pass; ++trial) {
    net::ModelConfig cfg;
    SplitMix64 rng(4000 + trial);
    cfg.q1 = 8 + int(rng.next_below(12));
    cfg.k1 = 3 + int(rng.next_below(3));
    cfg.q2 = 3 + int(rng.next_below(4));
    cfg.k2 = 2 + int(rng.next_below(3));
    cfg.num_datasets = 3 + int(rng.next_below(5));
    const double lambda = 0.05 + rng.next_double();

    auto model = net::MetricModelT<double>::create(cfg, 5000 + trial);
    auto pts = random_points(30 + int(rng.next_below(30)), 6000 + trial);
    int target = int(rng.next_below(cfg.num_datasets));

    // analytic gradient delivered through the reversal node
    net::ExtractorTrace<double> tr;
    net::extractor_forward<double>(pts, model, tr);
    auto adv = net::head_forward<double>(tr.z, model.adv_hidden, model.adv_out, 0.2, false, 0);
    auto ce = net::weighted_cross_entropy<double>(adv.logits, target, 1.0);
    auto grads = net::MetricModelT<double>::zeros_like(model);
    auto dz = net::head_backward<double>(adv, tr.z, model.adv_hidden, model.adv_out, 0.2,
                                         ce.dlogits, grads.adv_hidden, grads.adv_out);
    auto dz_rev = net::gradient_reversal_backward(dz, lambda);
    net::extractor_backward<double>(tr, model, dz_rev, grads);

    // numeric no-reversal gradient per parameter entry; entries whose +/-h
    // forwards cross a max/relu routing boundary are not differentiable there
    for (int layer = 0; layer < 3 && pass; ++layer) {
      for (int pi = 0; pi < 3 && pass; ++pi) {
        std::size_t idx = (std::size_t(pi) * 41 + trial) % model.mlp1[layer].W.v.size();
        auto mp = model, mm = model;
        mp.mlp1[layer].W.v[idx] += kStep;
        mm.mlp1[layer].W.v[idx] -= kStep;
        auto fp = adversary_loss(mp, pts, target);
        auto fm = adversary_loss(mm, pts, target);
        if (!same_routing(fp.routing, fm.routing)) {
          ++skipped;
          continue;
        }
        double numeric = (fp.loss - fm.loss) / (2 * kStep);
        double err = rel_err(-lambda * numeric, grads.mlp1[layer].W.v[idx]);
        worst = std::max(worst, err);
        ++checked;
        if (err >= kRelTol) {
          pass = false;
          detail = "model " + std::to_string(trial) + " entry rel err " + std::to_string(err);
        }
      }
    }
  }
  if (pass)
    detail = "20 models, " + std::to_string(checked) + " entries (" + std::to_string(skipped) +
             " at routing boundaries skipped), worst rel err " + std::to_string(worst);
  report(1, pass && checked >= 100, detail, timer.elapsed());
}

// ---------------------------------------------------------------------------
// criterion 2: per-layer gradient checks on randomized shapes

void criterion_2() {
  Timer timer;
  bool pass = true;
  std::string failure;
  double worst = 0;

  auto check = [&](const char* name, double analytic, double numeric) {
    double err = rel_err(numeric, analytic);
    worst = std::max(worst, err);
    if (err >= kRelTol && pass) {
      pass = false;
      failure = std::string(name) + " rel err " + std::to_string(err);
    }
  };

  for (int trial = 0; trial < 10; ++trial) {
    SplitMix64 rng(9000 + trial);
    const int rows = 2 + int(rng.next_below(8));
    const int in = 2 + int(rng.next_below(6));
    const int out = 2 + int(rng.next_below(6));

    auto rnd = [&](int r, int c, std::uint64_t s) {
      auto t = TensorT<double>::zeros(r, c);
      SplitMix64 g(s);
      for (auto& v : t.v) v = g.uniform(-1.5, 1.5);
      return t;
    };

    // dense
    {
      auto layer = net::DenseT<double>::he_uniform(in, out, rng.next_u64());
      auto x = rnd(rows, in, rng.next_u64());
      auto dy = rnd(rows, out, rng.next_u64());
      auto grad = net::DenseT<double>::zeros(in, out);
      auto dx = net::dense_backward(x, layer, dy, grad);
      auto loss = [&](const TensorT<double>& xi, const net::DenseT<double>& li) {
        auto y = net::dense_forward(xi, li);
        double s = 0;
        for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * dy.v[i];
        return s;
      };
      for (int rep = 0; rep < 4; ++rep) {
        std::size_t i = rng.next_below(x.v.size());
        auto xp = x, xm = x;
        xp.v[i] += kStep;
        xm.v[i] -= kStep;
        check("dense/dx", dx.v[i], (loss(xp, layer) - loss(xm, layer)) / (2 * kStep));
        std::size_t w = rng.next_below(layer.W.v.size());
        auto lp = layer, lm = layer;
        lp.W.v[w] += kStep;
        lm.W.v[w] -= kStep;
        check("dense/dW", grad.W.v[w], (loss(x, lp) - loss(x, lm)) / (2 * kStep));
        std::size_t b = rng.next_below(layer.b.v.size());
        auto bp = layer, bm = layer;
        bp.b.v[b] += kStep;
        bm.b.v[b] -= kStep;
        check("dense/db", grad.b.v[b], (loss(x, bp) - loss(x, bm)) / (2 * kStep));
      }
    }

    // leaky relu, clear of the kink
    {
      auto x = rnd(rows, in, rng.next_u64());
      for (auto& v : x.v)
        if (std::fabs(v) < 0.05) v = 0.2;
      auto dy = rnd(rows, in, rng.next_u64());
      auto post = x;
      net::leaky_relu_inplace<double>(post, 0.2);
      auto dx = dy;
      net::leaky_relu_backward<double>(post, dx, 0.2);
      for (int rep = 0; rep < 6; ++rep) {
        std::size_t i = rng.next_below(x.v.size());
        auto f = [&](double v) { return (v > 0 ? v : 0.2 * v) * dy.v[i]; };
        check("leaky_relu", dx.v[i], (f(x.v[i] + kStep) - f(x.v[i] - kStep)) / (2 * kStep));
      }
    }

    // max over neighbors at non-tied maxima
    {
      const int q = 2 + int(rng.next_below(4)), k = 2 + int(rng.next_below(4));
      auto x = rnd(q * k, in, rng.next_u64());
      std::vector<int> am;
      auto y = net::reduce_max(x, k, am);
      auto dy = rnd(q, in, rng.next_u64());
      auto dx = net::reduce_max_backward(dy, am, k);
      auto loss = [&](const TensorT<double>& xi) {
        std::vector<int> am2;
        auto yi = net::reduce_max(xi, k, am2);
        double s = 0;
        for (std::size_t i = 0; i < yi.v.size(); ++i) s += yi.v[i] * dy.v[i];
        return s;
      };
      for (int rep = 0; rep < 6; ++rep) {
        std::size_t i = rng.next_below(x.v.size());
        auto xp = x, xm = x;
        xp.v[i] += kStep;
        xm.v[i] -= kStep;
        std::vector<int> amp, amm;
        net::reduce_max(xp, k, amp);
        net::reduce_max(xm, k, amm);
        if (amp != amm) continue;  // perturbed across a tie
        check("reduce_max", dx.v[i], (loss(xp) - loss(xm)) / (2 * kStep));
      }
    }

    // softmax cross-entropy (the loss layer itself)
    {
      const int u = 2 + int(rng.next_below(5));
      auto logits = rnd(rows, u, rng.next_u64());
      int target = int(rng.next_below(u));
      double w = 0.25 + rng.next_double();
      auto ce = net::weighted_cross_entropy(logits, target, w);
      for (int rep = 0; rep < 6; ++rep) {
        std::size_t i = rng.next_below(logits.v.size());
        auto lp = logits, lm = logits;
        lp.v[i] += kStep;
        lm.v[i] -= kStep;
        check("softmax_ce", ce.dlogits.v[i],
              (net::weighted_cross_entropy(lp, target, w).loss -
               net::weighted_cross_entropy(lm, target, w).loss) /
                  (2 * kStep));
      }
    }

    // dropout with a fixed mask
    {
      auto x = rnd(rows, in, rng.next_u64());
      auto dy = rnd(rows, in, rng.next_u64());
      std::uint64_t seed = rng.next_u64();
      auto fwd = [&](const TensorT<double>& xi) {
        auto y = xi;
        std::vector<char> mask;
        net::dropout_forward(y, mask, seed);
        double s = 0;
        for (std::size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * dy.v[i];
        return s;
      };
      auto dx = dy;
      {
        auto y = x;
        std::vector<char> mask;
        net::dropout_forward(y, mask, seed);
        net::dropout_backward(dx, mask);
      }
      for (int rep = 0; rep < 4; ++rep) {
        std::size_t i = rng.next_below(x.v.size());
        auto xp = x, xm = x;
        xp.v[i] += kStep;
        xm.v[i] -= kStep;
        check("dropout", dx.v[i], (fwd(xp) - fwd(xm)) / (2 * kStep));
      }
    }

    // gradient reversal: exact scale by -lambda
    {
      auto up = rnd(rows, in, rng.next_u64());
      double lambda = rng.next_double();
      auto down = net::gradient_reversal_backward(up, lambda);
      for (std::size_t i = 0; i < up.v.size(); ++i)
        check("gradient_reversal", down.v[i], -lambda * up.v[i]);
    }
  }
  report(2, pass,
         pass ? "dense, leaky_relu, reduce_max, softmax_ce, dropout, reversal; worst rel err " +
                    std::to_string(worst)
              : failure,
         timer.elapsed());
}

// ---------------------------------------------------------------------------
// criterion 3: spatial oracles, bitwise

std::vector<Vec3> fps_oracle(const std::vector<Vec3>& pts, int m) {
  std::size_t take = std::min<std::size_t>(m, pts.size());
  std::vector<Vec3> sel;
  Vec3 centroid = spatial::stable_centroid(pts);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double di = sq_dist(pts[i], centroid), db = sq_dist(pts[best], centroid);
    if (di > db || (di == db && lex_less(pts[i], pts[best]))) best = i;
  }
  std::vector<char> used(pts.size(), 0);
  used[best] = 1;
  sel.push_back(pts[best]);
  while (sel.size() < take) {
    double best_d = -1.0;
    std::size_t arg = 0;
    bool found = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& s : sel) d = std::min(d, sq_dist(pts[i], s));
      if (!found || d > best_d || (d == best_d && lex_less(pts[i], pts[arg]))) {
        best_d = d;
        arg = i;
        found = true;
      }
    }
    used[arg] = 1;
    sel.push_back(pts[arg]);
  }
  return sel;
}

void criterion_3() {
  Timer timer;
  bool pass = true;
  std::string detail;

  auto sorted = [](std::vector<Vec3> v) {
    std::sort(v.begin(), v.end(), lex_less);
    return v;
  };
  auto same = [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(a[i] == b[i])) return false;
    return true;
  };

  for (int trial = 0; trial < 500 && pass; ++trial) {
    SplitMix64 rng(11000 + trial);
    int n = 2 + int(rng.next_below(255));
    auto pts = random_points(n, rng.next_u64());
    int m = 1 + int(rng.next_below(n));
    auto got = sorted(spatial::gather(pts, spatial::farthest_point_sampling(pts, m).indices));
    auto want = sorted(fps_oracle(pts, m));
    if (!same(got, want)) {
      pass = false;
      detail = "fps mismatch on instance " + std::to_string(trial);
    }

    int k = 1 + int(rng.next_below(12));
    int nq = 1 + int(rng.next_below(16));
    auto queries = random_points(nq, rng.next_u64());
    auto table = spatial::knn(pts, queries, k);
    for (int q = 0; q < nq && pass; ++q) {
      std::vector<Vec3> srt = pts;
      const Vec3 qp = queries[q];
      std::sort(srt.begin(), srt.end(), [&](const Vec3& a, const Vec3& b) {
        double da = sq_dist(a, qp), db = sq_dist(b, qp);
        if (da != db) return da < db;
        return lex_less(a, b);
      });
      srt.resize(table.k);
      auto got_nb = spatial::gather(pts, table.row(q));
      if (!same(sorted(got_nb), sorted(srt))) {
        pass = false;
        detail = "knn mismatch on instance " + std::to_string(trial);
      }
    }
  }

  for (int trial = 0; trial < 100 && pass; ++trial) {
    SplitMix64 rng(12000 + trial);
    PointCloud a, b;
    a.points = random_points(1 + int(rng.next_below(60)), rng.next_u64());
    b.points = random_points(1 + int(rng.next_below(60)), rng.next_u64());
    // independent double-loop oracle, same summation order
    auto dir = [](const PointCloud& from, const PointCloud& to) {
      double s = 0;
      for (const auto& p : from.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : to.points) best = std::min(best, sq_dist(p, q));
        s += best;
      }
      return s / from.size();
    };
    if (eval::chamfer(a, b, 1) != dir(a, b) + dir(b, a)) {
      pass = false;
      detail = "chamfer mismatch on instance " + std::to_string(trial);
    }
  }
  if (pass) detail = "fps/knn on 500 instances, chamfer on 100, all bitwise";
  report(3, pass, detail, timer.elapsed());
}

// ---------------------------------------------------------------------------
// criterion 4: permutation invariance of the scene score

void criterion_4(const config::AppConfig& app) {
  Timer timer;
  auto model = net::MetricModel::create(app.train.model_config(), 314159);
  bool pass = true;
  double worst = 0;
  std::vector<double> worsts(50, 0.0);

  parallel_for(50, app.train.threads, [&](std::size_t i) {
    const auto& spec = app.train.datasets[i % app.train.datasets.size()];
    PointCloud pc = pcgen::generate_sample(spec, app.train.pattern, 20000 + i);
    auto s1 = score::score_cloud(model, pc);
    auto shuffled = pc;
    SplitMix64 rng(21000 + i);
    for (std::size_t j = shuffled.points.size(); j > 1; --j)
      std::swap(shuffled.points[j - 1], shuffled.points[rng.next_below(j)]);
    auto s2 = score::score_cloud(model, shuffled);
    for (int c = 0; c < 3; ++c)
      worsts[i] = std::max(worsts[i], std::fabs(s1.scene[c] - s2.scene[c]));
  });
  for (double w : worsts) worst = std::max(worst, w);
  pass = worst < 1e-6;
  report(4, pass, "50 clouds, worst |dS| = " + std::to_string(worst), timer.elapsed());
}

// ---------------------------------------------------------------------------
// criteria 5-8 produce CSV artifacts; criterion 11 reruns them byte-for-byte

struct TrainedRun {
  train::TrainResult fair;    // lambda = 0.3 (default config)
  train::TrainResult unfair;  // lambda = 0
};

TrainedRun run_trainings(const config::AppConfig& app, const std::string& out_dir,
                         bool quiet = false) {
  TrainedRun run;
  auto log = [quiet](const char* tag) {
    return [tag, quiet](const train::StepRecord& r) {
      if (quiet || !(r.has_eval || r.step % 100 == 0)) return;
      std::string line = "    [" + std::string(tag) + "] step " + std::to_string(r.step) +
                         " loss_c " + io::format_float(r.loss_c) + " loss_a " +
                         io::format_float(r.loss_a);
      if (r.has_eval)
        line += " acc_c " + io::format_float(r.acc_c) + " acc_a " + io::format_float(r.acc_a);
      std::printf("%s\n", line.c_str());
      std::fflush(stdout);
    };
  };

  run.fair = train::run_training(app.train, log("lambda=0.3"));
  io::write_text_file(out_dir + "/metrics.csv", run.fair.report.metrics_csv());
  io::write_text_file(out_dir + "/confusion_c.csv",
                      train::TrainReport::confusion_csv(run.fair.report.final_eval.confusion_c));
  io::write_text_file(out_dir + "/confusion_a.csv",
                      train::TrainReport::confusion_csv(run.fair.report.final_eval.confusion_a));

  train::TrainConfig unfair_cfg = app.train;
  unfair_cfg.lambda = 0.0f;
  run.unfair = train::run_training(unfair_cfg, log("lambda=0"));
  io::write_text_file(out_dir + "/metrics_lambda0.csv", run.unfair.report.metrics_csv());
  return run;
}

/// Feature-probe artifacts for criterion 6; shared with the criterion-11 rerun.
std::pair<double, double> probe_artifacts(const config::AppConfig& app, const TrainedRun& run,
                                          const std::string& out_dir) {
  std::vector<PointCloud> clouds;
  std::vector<const pcgen::DatasetSpec*> real;
  for (const auto& d : app.train.datasets)
    if (d.category == Category::Real) real.push_back(&d);
  for (int i = 0; i < 50; ++i) {
    const auto* spec = real[i % real.size()];
    clouds.push_back(pcgen::generate_sample(*spec, app.train.pattern, derive_seed(0xFA1235, i)));
  }
  score::ScoreOptions opts;
  opts.max_points = app.train.max_points;
  opts.threads = app.train.threads;
  double acc_fair = score::knn_feature_probe(score::export_features(run.fair.model, clouds, opts), 15);
  double acc_unfair =
      score::knn_feature_probe(score::export_features(run.unfair.model, clouds, opts), 15);

  std::string csv = "model,probe_accuracy\n";
  io::append_csv_row(csv, {"lambda0.3", io::format_float(acc_fair)});
  io::append_csv_row(csv, {"lambda0", io::format_float(acc_unfair)});
  io::write_text_file(out_dir + "/feature_probe.csv", csv);
  return {acc_fair, acc_unfair};
}

/// Noise-sweep artifacts for criterion 7; shared with the criterion-11 rerun.
std::vector<eval::NoiseSweepRow> noise_artifacts(const config::AppConfig& app,
                                                 const TrainedRun& run,
                                                 const std::string& out_dir) {
  const pcgen::DatasetSpec* synthetic = nullptr;
  for (const auto& d : app.train.datasets)
    if (d.category == Category::Synthetic && !synthetic) synthetic = &d;
  std::vector<double> sigmas{0.0, 0.1, 1.0, 3.0, 10.0};
  auto rows = eval::noise_sweep(
      run.fair.model,
      [&](std::uint64_t seed) {
        return pcgen::generate_sample(*synthetic, app.train.pattern, seed);
      },
      sigmas, 100, 0x509E57, app.train.max_points, app.train.threads);
  io::write_text_file(out_dir + "/noise_sweep.csv", eval::noise_sweep_csv(rows));
  return rows;
}

/// Patch-anomaly artifacts for criterion 8; shared with the criterion-11 rerun.
std::pair<double, double> anomaly_artifacts(const config::AppConfig& app, const TrainedRun& run,
                                            const std::string& out_dir) {
  std::vector<const pcgen::DatasetSpec*> real;
  for (const auto& d : app.train.datasets)
    if (d.category == Category::Real) real.push_back(&d);

  const int n_scans = 20;
  std::vector<double> in_means(n_scans), out_means(n_scans);
  parallel_for(n_scans, app.train.threads, [&](std::size_t i) {
    const auto* spec = real[i % real.size()];
    std::uint64_t seed = derive_seed(0xA70A11, i);
    PointCloud pc = pcgen::generate_sample(*spec, app.train.pattern, seed);
    SplitMix64 rng(derive_seed(seed, 0x77));
    double lo = rng.uniform(0, kTwoPi);
    auto patched = pcgen::inject_patch_anomaly(pc, lo, lo + kPi / 4, 1.0, derive_seed(seed, 3));

    score::ScoreOptions opts;
    opts.max_points = app.train.max_points;
    auto scores = score::score_cloud(run.fair.model, patched.cloud, opts);
    auto map = score::anomaly_map(run.fair.model, patched.cloud, scores, 4);

    double in_sum = 0, out_sum = 0;
    long n_in = 0, n_out = 0;
    for (std::size_t p = 0; p < patched.cloud.size(); ++p) {
      if (patched.mask[p]) {
        in_sum += map.point_p.at(int(p), 0);
        ++n_in;
      } else {
        out_sum += map.point_p.at(int(p), 0);
        ++n_out;
      }
    }
    in_means[i] = n_in ? in_sum / n_in : 0.0;
    out_means[i] = n_out ? out_sum / n_out : 0.0;
  });

  std::string csv = "scan,in_patch_p_real,out_patch_p_real\n";
  double mean_in = 0, mean_out = 0;
  for (int i = 0; i < n_scans; ++i) {
    io::append_csv_row(csv, {std::to_string(i), io::format_float(in_means[i]),
                             io::format_float(out_means[i])});
    mean_in += in_means[i];
    mean_out += out_means[i];
  }
  io::write_text_file(out_dir + "/anomaly_patch.csv", csv);
  return {mean_in / n_scans, mean_out / n_scans};
}

void criterion_5(const config::AppConfig& app, const TrainedRun& run, double train_seconds) {
  const auto& ev = run.fair.report.final_eval;
  double bound = train::adversary_lower_bound(3, run.fair.model.cfg.num_datasets, true, 2);

  // loss monotonicity smoke check rides along on the same run
  const auto& steps = run.fair.report.steps;
  double early = steps.front().loss_c;
  std::size_t at500 = std::min<std::size_t>(steps.size(), 500) - 1;
  double later = steps[at500].loss_c;

  bool pass = ev.acc_c >= 0.95 && ev.acc_a <= 0.60 && later < early;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "acc_c %.4f (need >= 0.95), acc_a %.4f (need <= 0.60, filtered bound %.2f), "
                "loss_c step1 %.2f -> step%zu %.3f, %ld held-out clouds",
                ev.acc_c, ev.acc_a, bound, at500 + 1, later, ev.n_clouds);
  report(5, pass, buf, train_seconds);
}

void criterion_6(const config::AppConfig& app, const TrainedRun& run, const std::string& out_dir) {
  Timer timer;
  auto [acc_fair, acc_unfair] = probe_artifacts(app, run, out_dir);
  bool pass = acc_fair <= acc_unfair - 0.15;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "probe acc: lambda0 %.4f vs lambda0.3 %.4f (need gap >= 0.15)",
                acc_unfair, acc_fair);
  report(6, pass, buf, timer.elapsed());
}

void criterion_7(const config::AppConfig& app, const TrainedRun& run, const std::string& out_dir) {
  Timer timer;
  auto rows = noise_artifacts(app, run, out_dir);
  const auto& s0 = rows.front();
  const auto& s10 = rows.back();
  bool pass = (s10.mean[2] - s0.mean[2] >= 0.3) && (s0.mean[1] - s10.mean[1] >= 0.3);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "S_misc: %.3f -> %.3f (need +0.3); S_synthetic: %.3f -> %.3f (need -0.3)",
                s0.mean[2], s10.mean[2], s0.mean[1], s10.mean[1]);
  report(7, pass, buf, timer.elapsed());
}

void criterion_8(const config::AppConfig& app, const TrainedRun& run, const std::string& out_dir) {
  Timer timer;
  auto [mean_in, mean_out] = anomaly_artifacts(app, run, out_dir);
  bool pass = mean_in <= mean_out - 0.2;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "p_real in-patch %.4f vs out-of-patch %.4f over 20 scans (need gap >= 0.2)",
                mean_in, mean_out);
  report(8, pass, buf, timer.elapsed());
}

void criterion_9() {
  Timer timer;
  double unfiltered = train::adversary_lower_bound(3, 7, false, 2);
  double filtered = train::adversary_lower_bound(3, 7, true, 2);
  bool pass = unfiltered == 3.0 / 7.0 && filtered == 0.5;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "unfiltered %.6f (3/7), filtered %.3f (1/2)", unfiltered,
                filtered);
  report(9, pass, buf, timer.elapsed());
}

void criterion_10(const config::AppConfig& app, const TrainedRun& run) {
  Timer timer;
  const pcgen::DatasetSpec* real = nullptr;
  for (const auto& d : app.train.datasets)
    if (d.category == Category::Real && !real) real = &d;
  const ScanPattern& hr = app.train.pattern;
  const int f = 4;

  const int n_scans = 50;
  std::vector<double> s_gt(n_scans), s_up(n_scans), mse(n_scans);
  parallel_for(n_scans, app.train.threads, [&](std::size_t i) {
    std::uint64_t seed = derive_seed(0xB15EA7, i);
    PointCloud gt_cloud = pcgen::generate_sample(*real, hr, seed);
    auto gt_img = eval::project(gt_cloud, hr).image;
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
    score::ScoreOptions opts;
    opts.max_points = app.train.max_points;
    mse[i] = eval::masked_error(up_img, gt_img, eval::ErrorKind::MSE);
    s_gt[i] = score::score_cloud(run.fair.model, gt_cloud, opts).scene[0];
    s_up[i] = score::score_cloud(run.fair.model, up_cloud, opts).scene[0];
  });

  double mean_gt = 0, mean_up = 0, mean_mse = 0;
  for (int i = 0; i < n_scans; ++i) {
    mean_gt += s_gt[i];
    mean_up += s_up[i];
    mean_mse += mse[i];
  }
  mean_gt /= n_scans;
  mean_up /= n_scans;
  mean_mse /= n_scans;

  bool pass = mean_mse > 0 && mean_gt > mean_up;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "bilinear 4x: masked MSE %.5f (> 0), S_real GT %.4f > bilinear %.4f, %d scans",
                mean_mse, mean_gt, mean_up, n_scans);
  report(10, pass, buf, timer.elapsed());
}

void criterion_11(const config::AppConfig& app, const std::string& run1_dir,
                  const std::string& run2_dir) {
  Timer timer;
  // rerun criteria 5-8 with the same seeds into a second directory
  TrainedRun rerun = run_trainings(app, run2_dir, true);
  probe_artifacts(app, rerun, run2_dir);
  noise_artifacts(app, rerun, run2_dir);
  anomaly_artifacts(app, rerun, run2_dir);

  const char* files[] = {"metrics.csv",  "confusion_c.csv",   "confusion_a.csv",
                         "metrics_lambda0.csv", "feature_probe.csv", "noise_sweep.csv",
                         "anomaly_patch.csv"};
  bool pass = true;
  std::string detail = "criteria 5-8 artifacts byte-identical across reruns";
  for (const char* f : files) {
    std::string a = io::read_text_file(run1_dir + "/" + std::string(f));
    std::string b = io::read_text_file(run2_dir + "/" + std::string(f));
    if (a != b) {
      pass = false;
      detail = std::string("mismatch in ") + f;
      break;
    }
  }
  report(11, pass, detail, timer.elapsed());
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir = "acceptance_out";
  for (int i = 1; i < argc - 1; ++i)
    if (std::string(argv[i]) == "--out") out_dir = argv[i + 1];
  std::filesystem::create_directories(out_dir + "/run1");
  std::filesystem::create_directories(out_dir + "/run2");

  config::AppConfig app;  // the default configuration is the contract
  std::printf("acceptance: default config (steps %ld, batch %d, lambda %g, %zu datasets)\n",
              app.train.steps, app.train.batch_size, app.train.lambda,
              app.train.datasets.size());

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4(app);

  Timer train_timer;
  std::printf("training lambda=0.3 and lambda=0 models (criteria 5-8)...\n");
  TrainedRun run = run_trainings(app, out_dir + "/run1");
  double train_seconds = train_timer.elapsed();

  criterion_5(app, run, train_seconds);
  criterion_6(app, run, out_dir + "/run1");
  criterion_7(app, run, out_dir + "/run1");
  criterion_8(app, run, out_dir + "/run1");
  criterion_9();
  criterion_10(app, run);
  criterion_11(app, out_dir + "/run1", out_dir + "/run2");

  std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}
