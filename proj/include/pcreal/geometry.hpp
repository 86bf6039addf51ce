#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcreal {

/// Points are carried in double precision end to end; float32 appears only
/// in the network tensors and the binary interchange formats.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3& a, const Vec3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
  }
};

/// Squared distance: a pure function of the two points, so comparisons are
/// permutation-invariant.
inline double sq_dist(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double norm(const Vec3& a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

/// Lexicographic (x, y, z) order; the global tie-breaker.
inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }

/// Virtual rotating-LiDAR specification: rows of elevation angles times
/// azimuth steps. Angles in radians, ranges in meters.
struct ScanPattern {
  int rows = 64;
  int cols = 1024;
  double elevation_min = deg_to_rad(-24.8);
  double elevation_max = deg_to_rad(2.0);
  double azimuth_span = kTwoPi;
  double max_range = 120.0;

  void validate() const {
    if (rows < 1 || cols < 1) throw std::invalid_argument("ScanPattern: rows/cols must be >= 1");
    if (!(elevation_min < elevation_max))
      throw std::invalid_argument("ScanPattern: elevation_min must be < elevation_max");
    if (!(max_range > 0)) throw std::invalid_argument("ScanPattern: max_range must be > 0");
  }

  double elevation(int row) const {
    if (rows == 1) return 0.5 * (elevation_min + elevation_max);
    return elevation_min + (elevation_max - elevation_min) * row / (rows - 1);
  }
  double azimuth(int col) const { return azimuth_span * col / cols; }
  double elevation_step() const {
    return rows == 1 ? (elevation_max - elevation_min) : (elevation_max - elevation_min) / (rows - 1);
  }
  double azimuth_step() const { return azimuth_span / cols; }

  /// Unit ray direction for (elevation, azimuth).
  static Vec3 direction(double elevation, double azimuth) {
    double ce = std::cos(elevation);
    return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
  }
};

enum class Category : int { Real = 0, Synthetic = 1, Misc = 2 };

inline const char* category_name(Category c) {
  switch (c) {
    case Category::Real: return "real";
    case Category::Synthetic: return "synthetic";
    case Category::Misc: return "misc";
  }
  return "?";
}

inline Category category_from_name(const std::string& s) {
  if (s == "real") return Category::Real;
  if (s == "synthetic") return Category::Synthetic;
  if (s == "misc") return Category::Misc;
  throw std::invalid_argument("unknown category name: " + s);
}

/// Where a cloud came from. dataset_id/category are -1 when unknown
/// (e.g. clouds loaded from plain files).
struct Provenance {
  int dataset_id = -1;
  int category_id = -1;
  std::uint64_t seed = 0;
  bool empty_scan = false;  // raytrace produced no returns
};

/// Unordered set of 3D points in the sensor frame, meters. No consumer may
/// rely on point order.
struct PointCloud {
  std::vector<Vec3> points;
  Provenance provenance;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

}  // namespace pcreal
