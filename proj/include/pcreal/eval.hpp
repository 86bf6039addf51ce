#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcreal/geometry.hpp"
#include "pcreal/net.hpp"
#include "pcreal/pcgen.hpp"

namespace pcreal::eval {

/// Dense H x W cylindrical depth projection. Unmeasured pixels hold the
/// sentinel -1 and are masked out.
struct RangeImage {
  static constexpr float kUnmeasured = -1.0f;

  int rows = 0, cols = 0;
  std::vector<float> range;                 // row-major
  std::vector<char> measured;
  std::vector<double> row_elevation;        // radians, per row
  std::vector<double> col_azimuth;          // radians, per column

  float at(int i, int j) const { return range[std::size_t(i) * cols + j]; }
  bool is_measured(int i, int j) const { return measured[std::size_t(i) * cols + j] != 0; }
};

struct ProjectResult {
  RangeImage image;
  std::size_t dropped_points = 0;  // outside the angular span
};

/// Nearest-bin assignment by (elevation, azimuth); collisions keep the
/// smaller range.
ProjectResult project(const PointCloud& pc, const ScanPattern& pattern);
PointCloud unproject(const RangeImage& img);

/// Vertical-only align-corners linear interpolation; factor in {2, 4, 8}.
/// An output pixel is measured iff every contributing input pixel is.
RangeImage bilinear_upsample(const RangeImage& img, int factor);

/// CD = mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2.
double chamfer(const PointCloud& a, const PointCloud& b, int threads = 0);

enum class ErrorKind { MSE, MAE };

/// Mean over pixels measured in BOTH images.
double masked_error(const RangeImage& pred, const RangeImage& gt, ErrorKind kind);

void save_range_image(const std::string& path, const RangeImage& img);
RangeImage load_range_image(const std::string& path);

struct NoiseSweepRow {
  double sigma = 0.0;
  std::array<double, 3> mean{0, 0, 0};    // S per category
  std::array<double, 3> stddev{0, 0, 0};
};

using CloudGenerator = std::function<PointCloud(std::uint64_t seed)>;

/// Scores n generated clouds per sigma after add_range_noise.
std::vector<NoiseSweepRow> noise_sweep(const net::MetricModel& model, const CloudGenerator& gen,
                                       const std::vector<double>& sigmas, int n_clouds,
                                       std::uint64_t seed, int max_points = 8192, int threads = 0);
std::string noise_sweep_csv(const std::vector<NoiseSweepRow>& rows);

}  // namespace pcreal::eval
