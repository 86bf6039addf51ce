#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcreal/net.hpp"

namespace pcreal::score {

struct ScoreOptions {
  int max_points = 8192;  // subsample budget, same policy as training
  int threads = 0;        // batch helpers only; single-cloud calls stay serial
};

/// Per-query category probabilities plus the scene score S (their mean).
struct QueryScores {
  std::vector<Vec3> queries;
  Tensor p_c;                              // [Q x 3]
  std::array<double, 3> scene{0, 0, 0};    // S: real, synthetic, misc

  double realism() const { return scene[0]; }  // S^Real, the headline score
};

QueryScores score_cloud(const net::MetricModel& model, const PointCloud& pc,
                        const ScoreOptions& opts = {});

/// Every original point gets p_C interpolated from its nearest query points
/// with inverse-distance weights (convex, so values stay in the simplex).
struct AnomalyMap {
  Tensor point_p;  // [N x 3]
  int k_interp = 4;
};

AnomalyMap anomaly_map(const net::MetricModel& model, const PointCloud& pc,
                       const QueryScores& scores, int k_interp = 4);
AnomalyMap anomaly_map(const net::MetricModel& model, const PointCloud& pc,
                       const ScoreOptions& opts = {});

/// Color mapping: Real -> green, Synthetic -> blue, Misc -> red.
std::vector<std::array<std::uint8_t, 3>> probability_colors(const Tensor& p);

std::string scores_json(const QueryScores& s);
std::string scores_csv(const QueryScores& s);
void write_anomaly_ply(const std::string& path, const PointCloud& pc, const AnomalyMap& map);

/// Latent rows for the fairness probe; one row per query per cloud.
struct FeatureMatrix {
  Tensor z;  // [rows x U_F]
  std::vector<int> dataset;   // per row
  std::vector<int> category;  // per row
  std::vector<int> cloud;     // source cloud index per row
};

FeatureMatrix export_features(const net::MetricModel& model, const std::vector<PointCloud>& clouds,
                              const ScoreOptions& opts = {});
std::string features_csv(const FeatureMatrix& m);
FeatureMatrix features_from_csv(const std::string& text);

/// Leave-one-cloud-out k-NN classification of the dataset id in z-space over
/// Real-category rows. High accuracy means dataset-specific information is
/// still present in the features.
double knn_feature_probe(const FeatureMatrix& features, int k = 15);

}  // namespace pcreal::score
