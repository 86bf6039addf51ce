#include "pcreal/pcgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pcreal/rng.hpp"

namespace pcreal::pcgen {

namespace {

constexpr double kMinHitT = 1e-6;
constexpr double kMinRange = 1e-3;

struct Ray {
  double ox, oy, oz;  // origin (always the sensor at 0 here, kept for clarity)
  double dx, dy, dz;
};

double intersect_ground(const Ray& r, double ground_z) {
  if (r.dz == 0.0) return -1.0;
  double t = (ground_z - r.oz) / r.dz;
  return t > kMinHitT ? t : -1.0;
}

double intersect_sphere(const Ray& r, const Primitive& p) {
  double cx = p.center.x - r.ox, cy = p.center.y - r.oy, cz = p.center.z - r.oz;
  double b = cx * r.dx + cy * r.dy + cz * r.dz;
  double c = cx * cx + cy * cy + cz * cz - double(p.size.x) * p.size.x;
  double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  double s = std::sqrt(disc);
  double t = b - s;
  if (t > kMinHitT) return t;
  t = b + s;
  return t > kMinHitT ? t : -1.0;
}

double intersect_box(const Ray& r, const Primitive& p) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  const double o[3] = {r.ox, r.oy, r.oz};
  const double d[3] = {r.dx, r.dy, r.dz};
  const double c[3] = {p.center.x, p.center.y, p.center.z};
  const double h[3] = {p.size.x, p.size.y, p.size.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < c[a] - h[a] || o[a] > c[a] + h[a]) return -1.0;
      continue;
    }
    double t1 = (c[a] - h[a] - o[a]) / d[a];
    double t2 = (c[a] + h[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return -1.0;
  }
  if (tmin > kMinHitT) return tmin;
  return tmax > kMinHitT ? tmax : -1.0;
}

Vec3 box_normal(const Primitive& p, double px, double py, double pz) {
  double rx = (px - p.center.x) / p.size.x;
  double ry = (py - p.center.y) / p.size.y;
  double rz = (pz - p.center.z) / p.size.z;
  double ax = std::fabs(rx), ay = std::fabs(ry), az = std::fabs(rz);
  if (ax >= ay && ax >= az) return {rx > 0 ? 1.f : -1.f, 0.f, 0.f};
  if (ay >= az) return {0.f, ry > 0 ? 1.f : -1.f, 0.f};
  return {0.f, 0.f, rz > 0 ? 1.f : -1.f};
}

double wrap_azimuth(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

/// Shared noise core: one Box-Muller draw per point in cloud order so that
/// masked application lines up exactly with the unmasked op.
template <typename Apply>
void range_noise_pass(const PointCloud& pc, double sigma, std::uint64_t seed,
                      std::size_t* skipped, Apply&& apply) {
  SplitMix64 rng(derive_seed(seed, 0xC10D));
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    double eps = rng.normal(0.0, sigma);
    const Vec3& p = pc.points[i];
    double r = norm(p);
    if (r == 0.0) {
      if (skipped) ++*skipped;
      continue;
    }
    apply(i, p, r, eps);
  }
}

Vec3 scale_along_ray(const Vec3& p, double r, double eps) {
  double s = std::max(r + eps, kMinRange) / r;
  return {static_cast<double>(p.x * s), static_cast<double>(p.y * s),
          static_cast<double>(p.z * s)};
}

struct DepthImage {
  int rows = 0, cols = 0;
  std::vector<double> range;   // rows*cols
  std::vector<char> measured;  // rows*cols
};

DepthImage image_from_hits(const ScanPattern& pattern, const std::vector<RayHit>& hits) {
  DepthImage img;
  img.rows = pattern.rows;
  img.cols = pattern.cols;
  img.range.assign(std::size_t(pattern.rows) * pattern.cols, 0.0);
  img.measured.assign(std::size_t(pattern.rows) * pattern.cols, 0);
  for (const auto& h : hits) {
    std::size_t idx = std::size_t(h.row) * pattern.cols + h.col;
    img.range[idx] = h.range;
    img.measured[idx] = 1;
  }
  return img;
}

PointCloud unproject_image(const ScanPattern& pattern, const DepthImage& img) {
  PointCloud pc;
  for (int i = 0; i < img.rows; ++i) {
    double elev = pattern.elevation(i);
    for (int j = 0; j < img.cols; ++j) {
      std::size_t idx = std::size_t(i) * img.cols + j;
      if (!img.measured[idx]) continue;
      Vec3 d = ScanPattern::direction(elev, pattern.azimuth(j));
      double r = img.range[idx];
      pc.points.push_back({static_cast<double>(r * d.x), static_cast<double>(r * d.y),
                           static_cast<double>(r * d.z)});
    }
  }
  return pc;
}

}  // namespace

void SceneDescription::validate() const {
  for (const auto& p : primitives) {
    if (p.shape == Primitive::Shape::Sphere) {
      if (!(p.size.x > 0)) throw std::invalid_argument("sphere radius must be > 0");
      if (has_ground && p.center.z + p.size.x <= ground_z)
        throw std::invalid_argument("sphere lies entirely below the ground plane");
    } else {
      if (!(p.size.x > 0 && p.size.y > 0 && p.size.z > 0))
        throw std::invalid_argument("box half extents must be > 0");
      if (has_ground && p.center.z + p.size.z <= ground_z)
        throw std::invalid_argument("box lies entirely below the ground plane");
    }
  }
}

std::vector<RayHit> raytrace_hits(const SceneDescription& scene, const ScanPattern& pattern,
                                  const std::vector<double>* az_offsets) {
  scene.validate();
  pattern.validate();
  std::vector<RayHit> hits;
  hits.reserve(std::size_t(pattern.rows) * pattern.cols / 2);
  for (int i = 0; i < pattern.rows; ++i) {
    double elev = pattern.elevation(i);
    double ce = std::cos(elev), se = std::sin(elev);
    for (int j = 0; j < pattern.cols; ++j) {
      double az = pattern.azimuth(j);
      if (az_offsets) az += (*az_offsets)[j];
      Ray ray{0, 0, 0, ce * std::cos(az), ce * std::sin(az), se};
      double best_t = -1.0;
      int best_prim = -1;  // -1: ground
      if (scene.has_ground) {
        double t = intersect_ground(ray, scene.ground_z);
        if (t > 0) best_t = t;
      }
      for (std::size_t k = 0; k < scene.primitives.size(); ++k) {
        const auto& p = scene.primitives[k];
        double t = p.shape == Primitive::Shape::Sphere ? intersect_sphere(ray, p)
                                                       : intersect_box(ray, p);
        if (t > 0 && (best_t < 0 || t < best_t)) {
          best_t = t;
          best_prim = static_cast<int>(k);
        }
      }
      if (best_t < 0 || best_t > pattern.max_range) continue;
      RayHit h;
      h.row = i;
      h.col = j;
      h.range = best_t;
      double px = best_t * ray.dx, py = best_t * ray.dy, pz = best_t * ray.dz;
      h.point = {static_cast<double>(px), static_cast<double>(py), static_cast<double>(pz)};
      if (best_prim < 0) {
        h.normal = {0.f, 0.f, 1.f};
      } else {
        const auto& p = scene.primitives[best_prim];
        if (p.shape == Primitive::Shape::Sphere) {
          double nx = (px - p.center.x) / p.size.x, ny = (py - p.center.y) / p.size.x,
                 nz = (pz - p.center.z) / p.size.x;
          h.normal = {static_cast<double>(nx), static_cast<double>(ny), static_cast<double>(nz)};
        } else {
          h.normal = box_normal(p, px, py, pz);
        }
      }
      hits.push_back(h);
    }
  }
  return hits;
}

PointCloud raytrace(const SceneDescription& scene, const ScanPattern& pattern, std::uint64_t seed) {
  (void)seed;  // plain raytrace is noise-free; seed kept for interface symmetry
  auto hits = raytrace_hits(scene, pattern, nullptr);
  PointCloud pc;
  pc.points.reserve(hits.size());
  for (const auto& h : hits) pc.points.push_back(h.point);
  pc.provenance.empty_scan = pc.points.empty();
  return pc;
}

SceneDescription random_scene(const ScatterParams& params, std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, 0x5CE11E));
  SceneDescription scene;
  scene.ground_z = params.ground_z;
  int span = params.max_objects - params.min_objects;
  int n = params.min_objects + (span > 0 ? static_cast<int>(rng.next_below(span + 1)) : 0);
  scene.primitives.reserve(n);
  for (int i = 0; i < n; ++i) {
    Primitive p;
    bool is_box = rng.next_double() < params.box_fraction;
    double r2min = params.placement_radius_min * params.placement_radius_min;
    double r2max = params.placement_radius_max * params.placement_radius_max;
    double rad = std::sqrt(rng.uniform(r2min, r2max));
    double ang = rng.uniform(0.0, kTwoPi);
    double cx = rad * std::cos(ang), cy = rad * std::sin(ang);
    if (is_box) {
      p.shape = Primitive::Shape::Box;
      double hx = rng.uniform(params.box_half_min, params.box_half_max);
      double hy = rng.uniform(params.box_half_min, params.box_half_max);
      double hz = rng.uniform(params.box_half_min, params.box_half_max);
      p.size = {static_cast<double>(hx), static_cast<double>(hy), static_cast<double>(hz)};
      p.center = {static_cast<double>(cx), static_cast<double>(cy),
                  static_cast<double>(params.ground_z + hz)};
    } else {
      p.shape = Primitive::Shape::Sphere;
      double r = rng.uniform(params.sphere_radius_min, params.sphere_radius_max);
      p.size = {static_cast<double>(r), static_cast<double>(r), static_cast<double>(r)};
      p.center = {static_cast<double>(cx), static_cast<double>(cy),
                  static_cast<double>(params.ground_z + r)};
    }
    scene.primitives.push_back(p);
  }
  return scene;
}

PointCloud gen_geometric_set(const ScatterParams& params, const ScanPattern& pattern,
                             std::uint64_t seed) {
  PointCloud pc = raytrace(random_scene(params, seed), pattern, seed);
  pc.provenance.seed = seed;
  return pc;
}

PointCloud gen_real_surrogate(const RealSurrogateParams& params, const ScanPattern& pattern,
                              std::uint64_t seed) {
  SceneDescription scene = random_scene(params.scene, seed);

  // quantized azimuth jitter, one offset per column
  std::vector<double> az_offsets(pattern.cols, 0.0);
  if (params.jitter_levels > 0) {
    SplitMix64 jrng(derive_seed(seed, 0x117712));
    double quantum = pattern.azimuth_step() * params.jitter_quantum_frac;
    int levels = 2 * params.jitter_levels + 1;
    for (int j = 0; j < pattern.cols; ++j) {
      int n = static_cast<int>(jrng.next_below(levels)) - params.jitter_levels;
      az_offsets[j] = n * quantum;
    }
  }

  auto hits = raytrace_hits(scene, pattern, &az_offsets);

  // incidence-dependent dropout
  SplitMix64 drng(derive_seed(seed, 0xD401));
  PointCloud pc;
  pc.points.reserve(hits.size());
  for (const auto& h : hits) {
    double cos_inc = std::fabs(double(h.point.x) * h.normal.x + double(h.point.y) * h.normal.y +
                               double(h.point.z) * h.normal.z) /
                     h.range;
    double p_drop = std::clamp(params.dropout_base + params.dropout_scale * (1.0 - cos_inc), 0.0,
                               params.dropout_max);
    if (drng.next_double() < p_drop) continue;
    pc.points.push_back(h.point);
  }

  if (params.range_noise_sigma > 0) {
    pc = add_range_noise(pc, params.range_noise_sigma, derive_seed(seed, 0xA015E)).cloud;
  }
  pc.provenance.seed = seed;
  pc.provenance.empty_scan = pc.points.empty();
  return pc;
}

PointCloud gen_misc(int kind, const ScanPattern& pattern, const MiscParams& params,
                    std::uint64_t seed) {
  if (kind < 1 || kind > 4) throw std::invalid_argument("gen_misc: kind must be in {1,2,3,4}");
  SplitMix64 rng(derive_seed(seed, 0x315C + kind));

  if (kind == 3) {
    double sigma = rng.uniform(params.blob_sigma_min, params.blob_sigma_max);
    PointCloud pc;
    pc.points.reserve(params.blob_points);
    for (int i = 0; i < params.blob_points; ++i) {
      pc.points.push_back({static_cast<double>(rng.normal(0.0, sigma)),
                           static_cast<double>(rng.normal(0.0, sigma)),
                           static_cast<double>(rng.normal(0.0, sigma))});
    }
    pc.provenance.seed = seed;
    return pc;
  }

  pattern.validate();
  DepthImage img;
  if (kind == 4 && params.patch_base_raytraced) {
    auto hits = raytrace_hits(random_scene(params.patch_scene, seed), pattern, nullptr);
    img = image_from_hits(pattern, hits);
  } else {
    // depth ramp: over rows (kind 1, and the kind-4 fallback base) or columns
    img.rows = pattern.rows;
    img.cols = pattern.cols;
    img.range.resize(std::size_t(pattern.rows) * pattern.cols);
    img.measured.assign(img.range.size(), 1);
    for (int i = 0; i < pattern.rows; ++i) {
      for (int j = 0; j < pattern.cols; ++j) {
        double f;
        if (kind == 2) {
          f = pattern.cols > 1 ? double(j) / (pattern.cols - 1) : 0.0;
        } else {
          f = pattern.rows > 1 ? double(i) / (pattern.rows - 1) : 0.0;
        }
        img.range[std::size_t(i) * pattern.cols + j] =
            params.ramp_d_min + (params.ramp_d_max - params.ramp_d_min) * f;
      }
    }
  }

  if (kind == 4) {
    int span = params.patch_count_max - params.patch_count_min;
    int n_patches =
        params.patch_count_min + (span > 0 ? static_cast<int>(rng.next_below(span + 1)) : 0);
    for (int p = 0; p < n_patches; ++p) {
      int ph = std::max(1, static_cast<int>(std::lround(
                               rng.uniform(params.patch_h_frac_min, params.patch_h_frac_max) *
                               img.rows)));
      int pw = std::max(1, static_cast<int>(std::lround(
                               rng.uniform(params.patch_w_frac_min, params.patch_w_frac_max) *
                               img.cols)));
      ph = std::min(ph, img.rows);
      pw = std::min(pw, img.cols);
      int r0 = img.rows > ph ? static_cast<int>(rng.next_below(img.rows - ph + 1)) : 0;
      int c0 = img.cols > pw ? static_cast<int>(rng.next_below(img.cols - pw + 1)) : 0;
      double dist = rng.uniform(params.patch_distance_min, params.patch_distance_max);
      for (int i = r0; i < r0 + ph; ++i) {
        for (int j = c0; j < c0 + pw; ++j) {
          std::size_t idx = std::size_t(i) * img.cols + j;
          img.range[idx] = dist;
          img.measured[idx] = 1;
        }
      }
    }
  }

  PointCloud pc = unproject_image(pattern, img);
  double sigma = rng.uniform(params.noise_sigma_min, params.noise_sigma_max);
  if (sigma > 0) pc = add_range_noise(pc, sigma, derive_seed(seed, 0xA015E)).cloud;
  pc.provenance.seed = seed;
  return pc;
}

NoiseResult add_range_noise(const PointCloud& pc, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("add_range_noise: sigma must be >= 0");
  NoiseResult out;
  out.cloud = pc;
  range_noise_pass(pc, sigma, seed, &out.skipped_origin_points,
                   [&](std::size_t i, const Vec3& p, double r, double eps) {
                     out.cloud.points[i] = scale_along_ray(p, r, eps);
                   });
  return out;
}

PatchResult inject_patch_anomaly(const PointCloud& pc, double az_lo, double az_hi, double sigma,
                                 std::uint64_t seed) {
  if (az_lo == az_hi) throw std::invalid_argument("inject_patch_anomaly: empty azimuth interval");
  double lo = wrap_azimuth(az_lo);
  double hi = az_hi;
  // allow [0, 2pi) to mean the full circle
  bool full = std::fabs(az_hi - az_lo) >= kTwoPi;
  hi = wrap_azimuth(hi);
  PatchResult out;
  out.cloud = pc;
  out.mask.assign(pc.points.size(), false);
  range_noise_pass(pc, sigma, seed, &out.skipped_origin_points,
                   [&](std::size_t i, const Vec3& p, double r, double eps) {
                     double az = wrap_azimuth(std::atan2(double(p.y), double(p.x)));
                     bool in;
                     if (full) {
                       in = true;
                     } else if (lo <= hi) {
                       in = az >= lo && az < hi;
                     } else {
                       in = az >= lo || az < hi;
                     }
                     if (!in) return;
                     out.mask[i] = true;
                     out.cloud.points[i] = scale_along_ray(p, r, eps);
                   });
  return out;
}

void DatasetSpec::validate() const {
  if (id < 0) throw std::invalid_argument("DatasetSpec: id must be >= 0");
  if (kind != "real_surrogate" && kind != "geometric_set" && kind != "misc1" && kind != "misc2" &&
      kind != "misc3" && kind != "misc4")
    throw std::invalid_argument("DatasetSpec '" + name + "': unknown generator kind '" + kind +
                                "'");
}

PointCloud generate_sample(const DatasetSpec& spec, const ScanPattern& pattern,
                           std::uint64_t sample_seed) {
  spec.validate();
  PointCloud pc;
  if (spec.kind == "real_surrogate") {
    pc = gen_real_surrogate(spec.real, pattern, sample_seed);
  } else if (spec.kind == "geometric_set") {
    pc = gen_geometric_set(spec.geo, pattern, sample_seed);
  } else {
    int kind = spec.kind[4] - '0';
    pc = gen_misc(kind, pattern, spec.misc, sample_seed);
  }
  pc.provenance.dataset_id = spec.id;
  pc.provenance.category_id = static_cast<int>(spec.category);
  pc.provenance.seed = sample_seed;
  return pc;
}

RealSurrogateParams real_surrogate_style(int style) {
  RealSurrogateParams p;
  // Both styles share a similar noise floor (the common Real trait the
  // extractor must keep) and differ in scene statistics, dropout and jitter
  // (the dataset-specific traits the adversary pushes out). The floor sits
  // well above real-sensor spec sheets so it stays visible against the
  // desk-scale neighborhood spacing.
  if (style == 0) {
    // sparse large clutter
    p.scene.min_objects = 12;
    p.scene.max_objects = 24;
    p.scene.box_fraction = 0.6;
    p.scene.box_half_min = 0.4;
    p.scene.box_half_max = 2.5;
    p.scene.sphere_radius_min = 0.3;
    p.scene.sphere_radius_max = 1.5;
    p.range_noise_sigma = 0.09;
    p.dropout_base = 0.05;
    p.dropout_scale = 0.5;
    p.jitter_levels = 2;
  } else if (style == 1) {
    // dense small clutter, different dropout curve
    p.scene.min_objects = 30;
    p.scene.max_objects = 50;
    p.scene.box_fraction = 0.3;
    p.scene.box_half_min = 0.2;
    p.scene.box_half_max = 1.0;
    p.scene.sphere_radius_min = 0.15;
    p.scene.sphere_radius_max = 0.8;
    p.range_noise_sigma = 0.11;
    p.dropout_base = 0.10;
    p.dropout_scale = 0.3;
    p.jitter_levels = 1;
  } else {
    throw std::invalid_argument("real_surrogate_style: style must be 0 or 1");
  }
  return p;
}

ScatterParams synthetic_scene_style(int style) {
  ScatterParams p;
  if (style == 0) {
    // simulator-like scene mix
    p.min_objects = 15;
    p.max_objects = 30;
    p.box_fraction = 0.5;
    p.box_half_min = 0.3;
    p.box_half_max = 2.0;
    p.sphere_radius_min = 0.3;
    p.sphere_radius_max = 1.2;
  } else if (style == 1) {
    // classic sphere/cube scatter
    p.min_objects = 10;
    p.max_objects = 40;
    p.box_fraction = 0.5;
    p.box_half_min = 0.5;
    p.box_half_max = 2.0;
    p.sphere_radius_min = 0.5;
    p.sphere_radius_max = 2.0;
  } else {
    throw std::invalid_argument("synthetic_scene_style: style must be 0 or 1");
  }
  return p;
}

std::vector<DatasetSpec> default_support_sets() {
  std::vector<DatasetSpec> specs(7);
  specs[0].id = 0;
  specs[0].name = "real_a";
  specs[0].category = Category::Real;
  specs[0].kind = "real_surrogate";
  specs[0].real = real_surrogate_style(0);

  specs[1].id = 1;
  specs[1].name = "real_b";
  specs[1].category = Category::Real;
  specs[1].kind = "real_surrogate";
  specs[1].real = real_surrogate_style(1);

  specs[2].id = 2;
  specs[2].name = "sim_scene";
  specs[2].category = Category::Synthetic;
  specs[2].kind = "geometric_set";
  specs[2].geo = synthetic_scene_style(0);

  specs[3].id = 3;
  specs[3].name = "geometric";
  specs[3].category = Category::Synthetic;
  specs[3].kind = "geometric_set";
  specs[3].geo = synthetic_scene_style(1);

  specs[4].id = 4;
  specs[4].name = "misc1";
  specs[4].category = Category::Misc;
  specs[4].kind = "misc1";

  specs[5].id = 5;
  specs[5].name = "misc2";
  specs[5].category = Category::Misc;
  specs[5].kind = "misc2";

  specs[6].id = 6;
  specs[6].name = "misc3";
  specs[6].category = Category::Misc;
  specs[6].kind = "misc3";
  return specs;
}

void validate_support_sets(const std::vector<DatasetSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("no datasets configured");
  int n_real = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].validate();
    for (std::size_t j = i + 1; j < specs.size(); ++j) {
      if (specs[i].id == specs[j].id)
        throw std::invalid_argument("duplicate dataset id " + std::to_string(specs[i].id));
    }
    if (specs[i].category == Category::Real) ++n_real;
  }
  if (n_real < 2) throw std::invalid_argument("at least two Real datasets are required");
}

}  // namespace pcreal::pcgen
