#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcreal/geometry.hpp"
#include "pcreal/rng.hpp"
#include "pcreal/spatial.hpp"
#include "pcreal/tensor.hpp"

namespace pcreal::net {

template <typename T>
using EigenRowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenRowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenRowMat<T>>;

// ---------------------------------------------------------------------------
// layers

template <typename T>
struct DenseT {
  TensorT<T> W;  // [in x out]
  TensorT<T> b;  // [out]

  int in() const { return W.d0; }
  int out() const { return W.d1; }

  static DenseT zeros(int in, int out) {
    DenseT d;
    d.W = TensorT<T>::zeros(in, out);
    d.b = TensorT<T>::zeros(out);
    return d;
  }

  /// He-style fan-in uniform init, zero bias.
  static DenseT he_uniform(int in, int out, std::uint64_t seed) {
    DenseT d = zeros(in, out);
    SplitMix64 rng(seed);
    double limit = std::sqrt(6.0 / in);
    for (auto& w : d.W.v) w = static_cast<T>(rng.uniform(-limit, limit));
    return d;
  }
};

/// Shared dense transform applied per row (the 1x1-kernel convolution of the
/// architecture table, written without a convolution dependency).
template <typename T>
TensorT<T> dense_forward(const TensorT<T>& x, const DenseT<T>& layer) {
  const int rows = x.d0;
  TensorT<T> y = TensorT<T>::zeros(rows, layer.out());
  ConstMatMap<T> X(x.data(), rows, layer.in());
  ConstMatMap<T> W(layer.W.data(), layer.in(), layer.out());
  MatMap<T> Y(y.data(), rows, layer.out());
  Y.noalias() = X * W;
  Eigen::Map<const Eigen::RowVector<T, Eigen::Dynamic>> b(layer.b.data(), layer.out());
  Y.rowwise() += b;
  return y;
}

/// dX from dY; dW/db accumulated into grad.
template <typename T>
TensorT<T> dense_backward(const TensorT<T>& x, const DenseT<T>& layer, const TensorT<T>& dy,
                          DenseT<T>& grad) {
  const int rows = x.d0;
  TensorT<T> dx = TensorT<T>::zeros(rows, layer.in());
  ConstMatMap<T> X(x.data(), rows, layer.in());
  ConstMatMap<T> W(layer.W.data(), layer.in(), layer.out());
  ConstMatMap<T> dY(dy.data(), rows, layer.out());
  MatMap<T>(dx.data(), rows, layer.in()).noalias() = dY * W.transpose();
  MatMap<T>(grad.W.data(), layer.in(), layer.out()).noalias() += X.transpose() * dY;
  Eigen::Map<Eigen::RowVector<T, Eigen::Dynamic>>(grad.b.data(), layer.out()) +=
      dY.colwise().sum();
  return dx;
}

template <typename T>
void leaky_relu_inplace(TensorT<T>& x, T slope) {
  for (auto& v : x.v) v = v > T(0) ? v : slope * v;
}

/// dX = dY * (post > 0 ? 1 : slope), using post-activation sign.
template <typename T>
void leaky_relu_backward(const TensorT<T>& post, TensorT<T>& dy, T slope) {
  for (std::size_t i = 0; i < dy.v.size(); ++i)
    if (!(post.v[i] > T(0))) dy.v[i] *= slope;
}

/// Max over the neighbor axis: input [Q*K x C] (K consecutive rows per
/// query) -> [Q x C]. Ties route to the first (canonically ordered)
/// maximizing neighbor.
template <typename T>
TensorT<T> reduce_max(const TensorT<T>& x, int k, std::vector<int>& argmax) {
  const int q = x.d0 / k, c = x.d1;
  TensorT<T> y = TensorT<T>::zeros(q, c);
  argmax.assign(std::size_t(q) * c, 0);
  for (int i = 0; i < q; ++i) {
    const T* row0 = x.data() + std::size_t(i) * k * c;
    T* out = y.data() + std::size_t(i) * c;
    int* am = argmax.data() + std::size_t(i) * c;
    for (int ch = 0; ch < c; ++ch) out[ch] = row0[ch];
    for (int j = 1; j < k; ++j) {
      const T* row = row0 + std::size_t(j) * c;
      for (int ch = 0; ch < c; ++ch) {
        if (row[ch] > out[ch]) {
          out[ch] = row[ch];
          am[ch] = j;
        }
      }
    }
  }
  return y;
}

template <typename T>
TensorT<T> reduce_max_backward(const TensorT<T>& dy, const std::vector<int>& argmax, int k) {
  const int q = dy.d0, c = dy.d1;
  TensorT<T> dx = TensorT<T>::zeros(q * k, c);
  for (int i = 0; i < q; ++i)
    for (int ch = 0; ch < c; ++ch)
      dx.at(i * k + argmax[std::size_t(i) * c + ch], ch) = dy.at(i, ch);
  return dx;
}

template <typename T>
TensorT<T> softmax_rows(const TensorT<T>& logits) {
  TensorT<T> p = logits;
  for (int i = 0; i < p.d0; ++i) {
    T* row = p.data() + std::size_t(i) * p.d1;
    T m = row[0];
    for (int j = 1; j < p.d1; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (int j = 0; j < p.d1; ++j) s += std::exp(double(row[j] - m));
    for (int j = 0; j < p.d1; ++j) row[j] = static_cast<T>(std::exp(double(row[j] - m)) / s);
  }
  return p;
}

template <typename T>
struct CeResult {
  double loss = 0.0;
  TensorT<T> dlogits;
};

/// Mean over rows of -log softmax(logits)[target], times weight. Log-sum-exp
/// formulation, no literal log(0). All rows share one target label.
template <typename T>
CeResult<T> weighted_cross_entropy(const TensorT<T>& logits, int target, double weight) {
  if (weight < 0) throw std::invalid_argument("weighted_cross_entropy: weight must be >= 0");
  if (target < 0 || target >= logits.d1)
    throw std::invalid_argument("weighted_cross_entropy: target out of range");
  CeResult<T> r;
  r.dlogits = TensorT<T>::zeros(logits.d0, logits.d1);
  if (weight == 0.0) return r;  // loss 0, zero gradient
  const int q = logits.d0, u = logits.d1;
  double total = 0.0;
  const double scale = weight / q;
  for (int i = 0; i < q; ++i) {
    const T* row = logits.data() + std::size_t(i) * u;
    T* drow = r.dlogits.data() + std::size_t(i) * u;
    double m = row[0];
    for (int j = 1; j < u; ++j) m = std::max(m, double(row[j]));
    double s = 0.0;
    for (int j = 0; j < u; ++j) s += std::exp(double(row[j]) - m);
    double lse = m + std::log(s);
    total += lse - double(row[target]);
    for (int j = 0; j < u; ++j) {
      double p = std::exp(double(row[j]) - m) / s;
      drow[j] = static_cast<T>(scale * (p - (j == target ? 1.0 : 0.0)));
    }
  }
  r.loss = weight * total / q;
  return r;
}

/// Inverted dropout, keep probability 0.5; inference needs no rescale.
template <typename T>
void dropout_forward(TensorT<T>& x, std::vector<char>& mask, std::uint64_t seed) {
  mask.assign(x.size(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    if (rng.next_double() < 0.5) {
      mask[i] = 1;
      x.v[i] *= T(2);
    } else {
      x.v[i] = T(0);
    }
  }
}

template <typename T>
void dropout_backward(TensorT<T>& dx, const std::vector<char>& mask) {
  for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] = mask[i] ? dx.v[i] * T(2) : T(0);
}

/// Gradient-reversal connector: identity forward (nothing to compute),
/// upstream gradient times -lambda on the way down.
template <typename T>
TensorT<T> gradient_reversal_backward(const TensorT<T>& upstream, double lambda) {
  TensorT<T> g = upstream;
  for (auto& v : g.v) v = static_cast<T>(-lambda * double(v));
  return g;
}

// ---------------------------------------------------------------------------
// metric model

struct ModelConfig {
  int num_datasets = 7;  // adversary output width U_A
  float lambda = 0.3f;
  int q1 = 2048, k1 = 10;
  int q2 = 256, k2 = 10;
  float leaky_slope = 0.2f;

  static constexpr int kCategories = 3;              // U_C
  static constexpr std::array<int, 3> kMlp1{64, 64, 128};
  static constexpr std::array<int, 3> kMlp2{128, 128, 256};
  static constexpr int kHeadHidden = 128;
  static constexpr int kFeatureDim = 256;  // U_F
};

template <typename T>
struct MetricModelT {
  ModelConfig cfg;
  std::array<DenseT<T>, 3> mlp1;  // 3 -> 64 -> 64 -> 128
  std::array<DenseT<T>, 3> mlp2;  // 131 -> 128 -> 128 -> 256
  DenseT<T> cls_hidden, cls_out;  // 256 -> 128 -> 3
  DenseT<T> adv_hidden, adv_out;  // 256 -> 128 -> U_A

  static MetricModelT create(const ModelConfig& cfg, std::uint64_t seed) {
    MetricModelT m;
    m.cfg = cfg;
    int layer = 0;
    auto next_seed = [&] { return derive_seed(seed, 0x1717 + layer++); };
    int in = 3;
    for (int i = 0; i < 3; ++i) {
      m.mlp1[i] = DenseT<T>::he_uniform(in, ModelConfig::kMlp1[i], next_seed());
      in = ModelConfig::kMlp1[i];
    }
    in = ModelConfig::kMlp2[0] + 3;  // grouped features concatenated with local xyz
    for (int i = 0; i < 3; ++i) {
      m.mlp2[i] = DenseT<T>::he_uniform(in, ModelConfig::kMlp2[i], next_seed());
      in = ModelConfig::kMlp2[i];
    }
    m.cls_hidden =
        DenseT<T>::he_uniform(ModelConfig::kFeatureDim, ModelConfig::kHeadHidden, next_seed());
    m.cls_out =
        DenseT<T>::he_uniform(ModelConfig::kHeadHidden, ModelConfig::kCategories, next_seed());
    m.adv_hidden =
        DenseT<T>::he_uniform(ModelConfig::kFeatureDim, ModelConfig::kHeadHidden, next_seed());
    m.adv_out = DenseT<T>::he_uniform(ModelConfig::kHeadHidden, cfg.num_datasets, next_seed());
    return m;
  }

  static MetricModelT zeros_like(const MetricModelT& o) {
    MetricModelT m;
    m.cfg = o.cfg;
    for (int i = 0; i < 3; ++i) {
      m.mlp1[i] = DenseT<T>::zeros(o.mlp1[i].in(), o.mlp1[i].out());
      m.mlp2[i] = DenseT<T>::zeros(o.mlp2[i].in(), o.mlp2[i].out());
    }
    m.cls_hidden = DenseT<T>::zeros(o.cls_hidden.in(), o.cls_hidden.out());
    m.cls_out = DenseT<T>::zeros(o.cls_out.in(), o.cls_out.out());
    m.adv_hidden = DenseT<T>::zeros(o.adv_hidden.in(), o.adv_hidden.out());
    m.adv_out = DenseT<T>::zeros(o.adv_out.in(), o.adv_out.out());
    return m;
  }

  /// Visit every parameter tensor with a stable name (checkpoint + Adam order).
  template <typename F>
  void visit(F&& f) {
    for (int i = 0; i < 3; ++i) {
      f("mlp1." + std::to_string(i) + ".W", mlp1[i].W);
      f("mlp1." + std::to_string(i) + ".b", mlp1[i].b);
    }
    for (int i = 0; i < 3; ++i) {
      f("mlp2." + std::to_string(i) + ".W", mlp2[i].W);
      f("mlp2." + std::to_string(i) + ".b", mlp2[i].b);
    }
    f("cls_hidden.W", cls_hidden.W);
    f("cls_hidden.b", cls_hidden.b);
    f("cls_out.W", cls_out.W);
    f("cls_out.b", cls_out.b);
    f("adv_hidden.W", adv_hidden.W);
    f("adv_hidden.b", adv_hidden.b);
    f("adv_out.W", adv_out.W);
    f("adv_out.b", adv_out.b);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<MetricModelT*>(this)->visit(
        [&](const std::string& n, TensorT<T>& t) { f(n, static_cast<const TensorT<T>&>(t)); });
  }
};

using MetricModel = MetricModelT<float>;

// ---------------------------------------------------------------------------
// feature extractor

template <typename T>
struct ExtractorTrace {
  // level 1
  spatial::QuerySet q1;
  spatial::NeighborTable nb1;
  std::vector<Vec3> q1_pts;
  TensorT<T> x1;                    // [Q1*K1 x 3]
  std::array<TensorT<T>, 3> h1;     // post-activations
  TensorT<T> f1;                    // [Q1 x 128]
  std::vector<int> am1;
  // level 2
  spatial::QuerySet q2;             // indices into q1_pts
  spatial::NeighborTable nb2;       // neighbors within q1_pts
  std::vector<Vec3> q2_pts;
  TensorT<T> x2;                    // [Q2*K2 x 131]
  std::array<TensorT<T>, 3> h2;
  TensorT<T> z;                     // [Q2 x 256]
  std::vector<int> am2;
};

/// The two-level hierarchy: FPS -> KNN -> normalize -> shared MLP -> max,
/// then the same over the level-1 query points with features concatenated to
/// the local offsets.
template <typename T>
void extractor_forward(std::span<const Vec3> pts, const MetricModelT<T>& m,
                       ExtractorTrace<T>& tr) {
  if (pts.empty()) throw std::invalid_argument("extractor_forward: empty point cloud");
  const T slope = static_cast<T>(m.cfg.leaky_slope);

  tr.q1 = spatial::farthest_point_sampling(pts, m.cfg.q1);
  tr.q1_pts = spatial::gather(pts, tr.q1.indices);
  tr.nb1 = spatial::knn(pts, tr.q1_pts, m.cfg.k1);
  const int n_q1 = static_cast<int>(tr.q1_pts.size());
  const int k1 = tr.nb1.k;

  std::vector<double> x1 = spatial::group_normalize(pts, tr.q1_pts, tr.nb1);
  tr.x1 = TensorT<T>::zeros(n_q1 * k1, 3);
  for (std::size_t i = 0; i < x1.size(); ++i) tr.x1.v[i] = static_cast<T>(x1[i]);

  const TensorT<T>* cur = &tr.x1;
  for (int l = 0; l < 3; ++l) {
    tr.h1[l] = dense_forward(*cur, m.mlp1[l]);
    leaky_relu_inplace(tr.h1[l], slope);
    cur = &tr.h1[l];
  }
  tr.f1 = reduce_max(tr.h1[2], k1, tr.am1);

  tr.q2 = spatial::farthest_point_sampling(tr.q1_pts, m.cfg.q2);
  tr.q2_pts = spatial::gather(tr.q1_pts, tr.q2.indices);
  tr.nb2 = spatial::knn(tr.q1_pts, tr.q2_pts, m.cfg.k2);
  const int n_q2 = static_cast<int>(tr.q2_pts.size());
  const int k2 = tr.nb2.k;

  std::vector<double> x2geo = spatial::group_normalize(tr.q1_pts, tr.q2_pts, tr.nb2);
  const int c_feat = ModelConfig::kMlp1[2];
  tr.x2 = TensorT<T>::zeros(n_q2 * k2, 3 + c_feat);
  for (int q = 0; q < n_q2; ++q) {
    auto row = tr.nb2.row(q);
    for (int j = 0; j < k2; ++j) {
      T* dst = tr.x2.data() + (std::size_t(q) * k2 + j) * (3 + c_feat);
      const double* g = x2geo.data() + (std::size_t(q) * k2 + j) * 3;
      dst[0] = static_cast<T>(g[0]);
      dst[1] = static_cast<T>(g[1]);
      dst[2] = static_cast<T>(g[2]);
      const T* f = tr.f1.data() + std::size_t(row[j]) * c_feat;
      for (int c = 0; c < c_feat; ++c) dst[3 + c] = f[c];
    }
  }

  cur = &tr.x2;
  for (int l = 0; l < 3; ++l) {
    tr.h2[l] = dense_forward(*cur, m.mlp2[l]);
    leaky_relu_inplace(tr.h2[l], slope);
    cur = &tr.h2[l];
  }
  tr.z = reduce_max(tr.h2[2], k2, tr.am2);
}

template <typename T>
void extractor_backward(const ExtractorTrace<T>& tr, const MetricModelT<T>& m,
                        const TensorT<T>& dz, MetricModelT<T>& grads) {
  const T slope = static_cast<T>(m.cfg.leaky_slope);
  const int n_q2 = static_cast<int>(tr.q2_pts.size());
  const int k2 = tr.nb2.k;
  const int c_feat = ModelConfig::kMlp1[2];

  TensorT<T> d = reduce_max_backward(dz, tr.am2, k2);
  for (int l = 2; l >= 0; --l) {
    leaky_relu_backward(tr.h2[l], d, slope);
    const TensorT<T>& input = l == 0 ? tr.x2 : tr.h2[l - 1];
    d = dense_backward(input, m.mlp2[l], d, grads.mlp2[l]);
  }

  // scatter the feature part of d(x2) back onto the level-1 features
  TensorT<T> df1 = TensorT<T>::zeros(static_cast<int>(tr.q1_pts.size()), c_feat);
  for (int q = 0; q < n_q2; ++q) {
    auto row = tr.nb2.row(q);
    for (int j = 0; j < k2; ++j) {
      const T* src = d.data() + (std::size_t(q) * k2 + j) * (3 + c_feat) + 3;
      T* dst = df1.data() + std::size_t(row[j]) * c_feat;
      for (int c = 0; c < c_feat; ++c) dst[c] += src[c];
    }
  }

  TensorT<T> d1 = reduce_max_backward(df1, tr.am1, tr.nb1.k);
  for (int l = 2; l >= 0; --l) {
    leaky_relu_backward(tr.h1[l], d1, slope);
    const TensorT<T>& input = l == 0 ? tr.x1 : tr.h1[l - 1];
    d1 = dense_backward(input, m.mlp1[l], d1, grads.mlp1[l]);
  }
  // d1 is d(loss)/d(x1); inputs are data, nothing further to do
}

// ---------------------------------------------------------------------------
// classifier / adversary head

template <typename T>
struct HeadTrace {
  TensorT<T> hidden;  // post-activation, post-dropout
  std::vector<char> drop_mask;
  bool dropout_on = false;
  TensorT<T> logits;
  TensorT<T> probs;
};

template <typename T>
HeadTrace<T> head_forward(const TensorT<T>& z, const DenseT<T>& hidden, const DenseT<T>& out,
                          T slope, bool dropout_on, std::uint64_t seed) {
  HeadTrace<T> tr;
  tr.dropout_on = dropout_on;
  tr.hidden = dense_forward(z, hidden);
  leaky_relu_inplace(tr.hidden, slope);
  if (dropout_on) dropout_forward(tr.hidden, tr.drop_mask, seed);
  tr.logits = dense_forward(tr.hidden, out);
  tr.probs = softmax_rows(tr.logits);
  return tr;
}

/// Returns d(loss)/dz given d(loss)/d(logits).
template <typename T>
TensorT<T> head_backward(const HeadTrace<T>& tr, const TensorT<T>& z, const DenseT<T>& hidden,
                         const DenseT<T>& out, T slope, const TensorT<T>& dlogits,
                         DenseT<T>& g_hidden, DenseT<T>& g_out) {
  TensorT<T> dh = dense_backward(tr.hidden, out, dlogits, g_out);
  if (tr.dropout_on) dropout_backward(dh, tr.drop_mask);
  // recover pre-dropout activation sign: dropout keeps sign, zeros are dead either way
  leaky_relu_backward(tr.hidden, dh, slope);
  return dense_backward(z, hidden, dh, g_hidden);
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamSchedule {
  double lr0 = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t_warm = 500;    // linear warm-up steps
  double gamma = 0.5;   // decay factor per t_decay steps after warm-up
  long t_decay = 5000;

  double lr(long t) const {
    double warm = std::min(double(t) / double(t_warm), 1.0);
    double decay = std::pow(gamma, std::max<long>(t - t_warm, 0) / double(t_decay));
    return lr0 * warm * decay;
  }
};

template <typename T>
struct AdamStateT {
  long t = 0;
  MetricModelT<T> m, v;

  static AdamStateT zeros_like(const MetricModelT<T>& model) {
    AdamStateT s;
    s.m = MetricModelT<T>::zeros_like(model);
    s.v = MetricModelT<T>::zeros_like(model);
    return s;
  }
};

using AdamState = AdamStateT<float>;

/// One Adam step over every model parameter. t advances by one.
template <typename T>
void adam_step(MetricModelT<T>& params, const MetricModelT<T>& grads, AdamStateT<T>& state,
               const AdamSchedule& sched) {
  state.t += 1;
  const double lr = sched.lr(state.t);
  const double b1 = sched.beta1, b2 = sched.beta2;
  const double bc1 = 1.0 - std::pow(b1, state.t);
  const double bc2 = 1.0 - std::pow(b2, state.t);

  std::vector<TensorT<T>*> ps, ms, vs;
  std::vector<const TensorT<T>*> gs;
  params.visit([&](const std::string&, TensorT<T>& t) { ps.push_back(&t); });
  grads.visit([&](const std::string&, const TensorT<T>& t) { gs.push_back(&t); });
  state.m.visit([&](const std::string&, TensorT<T>& t) { ms.push_back(&t); });
  state.v.visit([&](const std::string&, TensorT<T>& t) { vs.push_back(&t); });

  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto& p = ps[i]->v;
    const auto& g = gs[i]->v;
    auto& mo = ms[i]->v;
    auto& vo = vs[i]->v;
    for (std::size_t j = 0; j < p.size(); ++j) {
      double gj = g[j];
      double mj = b1 * mo[j] + (1.0 - b1) * gj;
      double vj = b2 * vo[j] + (1.0 - b2) * gj * gj;
      mo[j] = static_cast<T>(mj);
      vo[j] = static_cast<T>(vj);
      double mhat = mj / bc1;
      double vhat = vj / bc2;
      p[j] = static_cast<T>(p[j] - lr * mhat / (std::sqrt(vhat) + sched.eps));
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoint I/O (float models; format documented in the README)

struct Checkpoint {
  MetricModel model;
  AdamState adam;
  bool has_adam = false;
};

void save_checkpoint(const std::string& path, const MetricModel& model, const AdamState* adam);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pcreal::net
