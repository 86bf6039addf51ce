#include "pcreal/score.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "pcreal/io.hpp"
#include "pcreal/parallel.hpp"
#include "pcreal/spatial.hpp"

namespace pcreal::score {

namespace {

// fixed salt: scoring must be a pure function of (checkpoint, cloud)
constexpr std::uint64_t kScoreSubsampleSeed = 0x5C04E;

}  // namespace

QueryScores score_cloud(const net::MetricModel& model, const PointCloud& pc,
                        const ScoreOptions& opts) {
  if (pc.empty()) throw std::invalid_argument("score_cloud: empty point cloud");
  std::vector<Vec3> pts =
      spatial::hash_subsample(pc.points, opts.max_points, kScoreSubsampleSeed);

  net::ExtractorTrace<float> tr;
  net::extractor_forward<float>(pts, model, tr);
  auto cls =
      net::head_forward(tr.z, model.cls_hidden, model.cls_out, model.cfg.leaky_slope, false, 0);

  QueryScores out;
  out.queries = tr.q2_pts;
  out.p_c = cls.probs;
  const int q = cls.probs.d0;
  for (int r = 0; r < q; ++r)
    for (int c = 0; c < 3; ++c) out.scene[c] += cls.probs.at(r, c);
  for (int c = 0; c < 3; ++c) out.scene[c] /= q;
  return out;
}

AnomalyMap anomaly_map(const net::MetricModel& model, const PointCloud& pc,
                       const QueryScores& scores, int k_interp) {
  (void)model;
  if (scores.queries.empty()) throw std::invalid_argument("anomaly_map: cloud was not scored");
  const int k = static_cast<int>(std::min<std::size_t>(k_interp, scores.queries.size()));

  AnomalyMap map;
  map.k_interp = k;
  map.point_p = Tensor::zeros(static_cast<int>(pc.size()), 3);

  spatial::NeighborTable nearest = spatial::knn(scores.queries, pc.points, k);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    auto row = nearest.row(i);
    // zero-distance query dominates: take its probabilities exactly
    int exact = -1;
    for (int j = 0; j < k; ++j) {
      if (sq_dist(pc.points[i], scores.queries[row[j]]) == 0.0) {
        exact = row[j];
        break;
      }
    }
    if (exact >= 0) {
      for (int c = 0; c < 3; ++c) map.point_p.at(static_cast<int>(i), c) = scores.p_c.at(exact, c);
      continue;
    }
    double wsum = 0.0, acc[3] = {0, 0, 0};
    for (int j = 0; j < k; ++j) {
      double d = std::sqrt(sq_dist(pc.points[i], scores.queries[row[j]]));
      double w = 1.0 / d;
      wsum += w;
      for (int c = 0; c < 3; ++c) acc[c] += w * scores.p_c.at(row[j], c);
    }
    for (int c = 0; c < 3; ++c)
      map.point_p.at(static_cast<int>(i), c) = static_cast<float>(acc[c] / wsum);
  }
  return map;
}

AnomalyMap anomaly_map(const net::MetricModel& model, const PointCloud& pc,
                       const ScoreOptions& opts) {
  return anomaly_map(model, pc, score_cloud(model, pc, opts), 4);
}

std::vector<std::array<std::uint8_t, 3>> probability_colors(const Tensor& p) {
  std::vector<std::array<std::uint8_t, 3>> colors(p.d0);
  for (int i = 0; i < p.d0; ++i) {
    auto to_byte = [](float v) {
      return static_cast<std::uint8_t>(std::clamp(v, 0.f, 1.f) * 255.f + 0.5f);
    };
    // Real -> green, Synthetic -> blue, Misc -> red
    colors[i] = {to_byte(p.at(i, 2)), to_byte(p.at(i, 0)), to_byte(p.at(i, 1))};
  }
  return colors;
}

std::string scores_json(const QueryScores& s) {
  nlohmann::ordered_json j;
  j["scene"] = {{"real", s.scene[0]}, {"synthetic", s.scene[1]}, {"misc", s.scene[2]}};
  auto& qs = j["queries"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < s.queries.size(); ++i) {
    nlohmann::ordered_json q;
    q["xyz"] = {s.queries[i].x, s.queries[i].y, s.queries[i].z};
    q["p"] = {s.p_c.at(static_cast<int>(i), 0), s.p_c.at(static_cast<int>(i), 1),
              s.p_c.at(static_cast<int>(i), 2)};
    qs.push_back(std::move(q));
  }
  return j.dump(2) + "\n";
}

std::string scores_csv(const QueryScores& s) {
  std::string out = "x,y,z,p_real,p_synthetic,p_misc\n";
  for (std::size_t i = 0; i < s.queries.size(); ++i) {
    io::append_csv_row(
        out, {io::format_float(s.queries[i].x), io::format_float(s.queries[i].y),
              io::format_float(s.queries[i].z), io::format_float(s.p_c.at(int(i), 0)),
              io::format_float(s.p_c.at(int(i), 1)), io::format_float(s.p_c.at(int(i), 2))});
  }
  return out;
}

void write_anomaly_ply(const std::string& path, const PointCloud& pc, const AnomalyMap& map) {
  auto colors = probability_colors(map.point_p);
  io::save_ply(path, pc, &colors);
}

FeatureMatrix export_features(const net::MetricModel& model, const std::vector<PointCloud>& clouds,
                              const ScoreOptions& opts) {
  FeatureMatrix out;
  const int u_f = net::ModelConfig::kFeatureDim;

  std::vector<Tensor> zs(clouds.size());
  parallel_for(clouds.size(), opts.threads, [&](std::size_t i) {
    std::vector<Vec3> pts =
        spatial::hash_subsample(clouds[i].points, opts.max_points, kScoreSubsampleSeed);
    net::ExtractorTrace<float> tr;
    net::extractor_forward<float>(pts, model, tr);
    zs[i] = std::move(tr.z);
  });

  int total_rows = 0;
  for (const auto& z : zs) total_rows += z.d0;
  out.z = Tensor::zeros(total_rows, u_f);
  int row = 0;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    for (int r = 0; r < zs[i].d0; ++r, ++row) {
      std::copy_n(zs[i].data() + std::size_t(r) * u_f, u_f, out.z.data() + std::size_t(row) * u_f);
      out.dataset.push_back(clouds[i].provenance.dataset_id);
      out.category.push_back(clouds[i].provenance.category_id);
      out.cloud.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::string features_csv(const FeatureMatrix& m) {
  std::string out = "cloud,dataset,category";
  for (int c = 0; c < m.z.d1; ++c) out += ",z" + std::to_string(c);
  out += '\n';
  for (int r = 0; r < m.z.d0; ++r) {
    out += std::to_string(m.cloud[r]);
    out += ',';
    out += std::to_string(m.dataset[r]);
    out += ',';
    out += std::to_string(m.category[r]);
    for (int c = 0; c < m.z.d1; ++c) {
      out += ',';
      out += io::format_float(m.z.at(r, c));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix features_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("features_from_csv: empty input");
  int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1 - 3;
  if (cols < 1) throw std::runtime_error("features_from_csv: bad header");

  std::vector<float> values;
  FeatureMatrix m;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    m.cloud.push_back(std::stoi(cell));
    std::getline(ls, cell, ',');
    m.dataset.push_back(std::stoi(cell));
    std::getline(ls, cell, ',');
    m.category.push_back(std::stoi(cell));
    for (int c = 0; c < cols; ++c) {
      if (!std::getline(ls, cell, ','))
        throw std::runtime_error("features_from_csv: short row " + std::to_string(rows + 1));
      values.push_back(std::stof(cell));
    }
    ++rows;
  }
  m.z = Tensor::zeros(rows, cols);
  std::copy(values.begin(), values.end(), m.z.data());
  return m;
}

double knn_feature_probe(const FeatureMatrix& features, int k) {
  // restrict to Real-category rows
  std::vector<int> rows;
  for (int r = 0; r < features.z.d0; ++r)
    if (features.category[r] == static_cast<int>(Category::Real)) rows.push_back(r);
  if (rows.empty()) throw std::invalid_argument("knn_feature_probe: no Real-category rows");
  {
    int first = features.dataset[rows.front()];
    bool multi = false;
    for (int r : rows)
      if (features.dataset[r] != first) multi = true;
    if (!multi) throw std::invalid_argument("knn_feature_probe: need at least two datasets");
  }

  const int d = features.z.d1;
  const int n = static_cast<int>(rows.size());
  int max_dataset = 0;
  for (int r : rows) max_dataset = std::max(max_dataset, features.dataset[r]);

  // squared norms once; distances via |a|^2 + |b|^2 - 2 a.b
  Eigen::MatrixXf Z(n, d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) Z(i, c) = features.z.at(rows[i], c);
  Eigen::VectorXf sq = Z.rowwise().squaredNorm();

  long correct = 0;
  const int block = 256;
  Eigen::MatrixXf dots;
  for (int b0 = 0; b0 < n; b0 += block) {
    int bn = std::min(block, n - b0);
    dots.noalias() = Z.middleRows(b0, bn) * Z.transpose();
    for (int bi = 0; bi < bn; ++bi) {
      int i = b0 + bi;
      int self_cloud = features.cloud[rows[i]];
      // k smallest distances among rows from other clouds
      std::vector<std::pair<float, int>> cand;
      cand.reserve(n);
      for (int j = 0; j < n; ++j) {
        if (features.cloud[rows[j]] == self_cloud) continue;
        float dist = sq(i) + sq(j) - 2.f * dots(bi, j);
        cand.emplace_back(dist, j);
      }
      int kk = std::min<int>(k, static_cast<int>(cand.size()));
      if (kk == 0) continue;
      std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
      std::vector<int> votes(max_dataset + 1, 0);
      for (int j = 0; j < kk; ++j) ++votes[features.dataset[rows[cand[j].second]]];
      int pred = 0;
      for (std::size_t v = 1; v < votes.size(); ++v)
        if (votes[v] > votes[pred]) pred = static_cast<int>(v);
      if (pred == features.dataset[rows[i]]) ++correct;
    }
  }
  return double(correct) / n;
}

}  // namespace pcreal::score
