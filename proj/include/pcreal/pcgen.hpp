#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcreal/geometry.hpp"

namespace pcreal::pcgen {

struct Primitive {
  enum class Shape { Sphere, Box };
  Shape shape = Shape::Sphere;
  Vec3 center{};
  // sphere: size.x = radius; box: half extents (hx, hy, hz)
  Vec3 size{1.f, 1.f, 1.f};
};

struct SceneDescription {
  bool has_ground = true;
  double ground_z = -2.0;
  std::vector<Primitive> primitives;

  void validate() const;
};

/// One LiDAR return with surface information, used by generators that model
/// sensor artifacts.
struct RayHit {
  int row = 0, col = 0;
  double range = 0.0;
  Vec3 point{};
  Vec3 normal{};
};

/// Scatter statistics for procedurally generated scenes.
struct ScatterParams {
  int min_objects = 10;
  int max_objects = 40;
  double box_fraction = 0.5;
  double box_half_min = 0.5, box_half_max = 2.0;
  double sphere_radius_min = 0.5, sphere_radius_max = 2.0;
  double placement_radius_min = 5.0, placement_radius_max = 50.0;
  double ground_z = -2.0;
};

struct RealSurrogateParams {
  ScatterParams scene;
  double range_noise_sigma = 0.02;
  // dropout probability p = clamp(base + scale * (1 - cos incidence), 0, max)
  double dropout_base = 0.05;
  double dropout_scale = 0.5;
  double dropout_max = 0.9;
  // quantized azimuth jitter: per-column offset of n * quantum with
  // n in [-levels, levels], quantum = azimuth_step * quantum_frac
  int jitter_levels = 2;
  double jitter_quantum_frac = 1.0 / 16.0;
};

struct MiscParams {
  double ramp_d_min = 2.0, ramp_d_max = 50.0;
  // per-cloud range-noise sigma for kinds 1, 2, 4; the lower end stays clear
  // of the Real-surrogate noise floor
  double noise_sigma_min = 0.3, noise_sigma_max = 2.0;
  // kind 3: isotropic Gaussian blob
  double blob_sigma_min = 5.0, blob_sigma_max = 50.0;
  int blob_points = 16384;
  // kind 4: constant-distance patches written into the depth image
  int patch_count_min = 3, patch_count_max = 8;
  double patch_distance_min = 2.0, patch_distance_max = 50.0;
  double patch_h_frac_min = 0.10, patch_h_frac_max = 0.50;
  double patch_w_frac_min = 0.05, patch_w_frac_max = 0.30;
  bool patch_base_raytraced = true;  // false: start from the row ramp
  ScatterParams patch_scene;
};

/// Casts one ray per (row, col); rays that miss produce no point.
/// Deterministic for fixed inputs and seed.
PointCloud raytrace(const SceneDescription& scene, const ScanPattern& pattern,
                    std::uint64_t seed = 0);

/// Raytrace keeping per-return surface info. az_offsets, when given, holds a
/// per-column azimuth offset (radians).
std::vector<RayHit> raytrace_hits(const SceneDescription& scene, const ScanPattern& pattern,
                                  const std::vector<double>* az_offsets = nullptr);

/// Uniformly scatters primitives in a disc around the sensor, resting on the
/// ground plane.
SceneDescription random_scene(const ScatterParams& params, std::uint64_t seed);

/// Noise-free raytraced scatter scene (the Synthetic surrogate).
PointCloud gen_geometric_set(const ScatterParams& params, const ScanPattern& pattern,
                             std::uint64_t seed);

/// Raytraced scene with sensor artifacts: Gaussian range noise, incidence-
/// dependent dropout, quantized azimuth jitter (the Real surrogate).
PointCloud gen_real_surrogate(const RealSurrogateParams& params, const ScanPattern& pattern,
                              std::uint64_t seed);

/// Kind 1: depth ramp over rows. 2: ramp over columns. 3: Gaussian blob.
/// 4: constant-distance patches in a depth image. Kinds 1, 2, 4 add Gaussian
/// range noise with a per-cloud sigma drawn from params.
PointCloud gen_misc(int kind, const ScanPattern& pattern, const MiscParams& params,
                    std::uint64_t seed);

struct NoiseResult {
  PointCloud cloud;
  std::size_t skipped_origin_points = 0;
};

/// Moves each point along its own ray direction by eps ~ N(0, sigma^2).
/// Points at the exact origin have no direction; they are left unchanged and
/// counted. New ranges are clamped to 1e-3 m so directions never flip.
NoiseResult add_range_noise(const PointCloud& pc, double sigma, std::uint64_t seed);

struct PatchResult {
  PointCloud cloud;
  std::vector<bool> mask;  // true where the point's azimuth fell in the interval
  std::size_t skipped_origin_points = 0;
};

/// add_range_noise restricted to points whose azimuth lies in
/// [az_lo, az_hi) (wrap-aware, radians in [0, 2pi)). Draws per-point noise
/// identically to add_range_noise, so the full interval reproduces it exactly.
PatchResult inject_patch_anomaly(const PointCloud& pc, double az_lo, double az_hi, double sigma,
                                 std::uint64_t seed);

/// A training or evaluation support set.
struct DatasetSpec {
  int id = 0;
  std::string name;
  Category category = Category::Real;
  std::string kind;  // real_surrogate | geometric_set | misc1 | misc2 | misc3 | misc4
  RealSurrogateParams real;
  ScatterParams geo;
  MiscParams misc;
  std::int64_t sample_count = -1;  // -1: infinite stream

  void validate() const;
};

PointCloud generate_sample(const DatasetSpec& spec, const ScanPattern& pattern,
                           std::uint64_t sample_seed);

/// Two procedurally distinct noisy-raytrace styles so the adversary has two
/// Real datasets to confuse.
RealSurrogateParams real_surrogate_style(int style);

/// Two Synthetic scatter styles (clean raytrace; style 0 mimics the Real
/// scene statistics, style 1 is the classic sphere/cube set).
ScatterParams synthetic_scene_style(int style);

/// The seven default support sets: 2 Real surrogates, 2 Synthetic, 3 Misc.
std::vector<DatasetSpec> default_support_sets();

/// Checks id uniqueness, one category per id, and >= 2 Real datasets.
void validate_support_sets(const std::vector<DatasetSpec>& specs);

}  // namespace pcreal::pcgen
