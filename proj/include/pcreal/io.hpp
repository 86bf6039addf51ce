#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcreal/geometry.hpp"

namespace pcreal::io {

enum class CloudFormat { Auto, Xyz, Bin3, Bin4, Ply };

/// ASCII XYZ, one "x y z" per line. Coordinates are printed with %.17g so a
/// save -> load -> save cycle is byte-identical.
void save_xyz(const std::string& path, const PointCloud& pc);
PointCloud load_xyz(const std::string& path);

/// Little-endian float32 triples. Bin4 is the 4-column (x, y, z, intensity)
/// layout; intensity is discarded on load.
void save_bin(const std::string& path, const PointCloud& pc);
PointCloud load_bin(const std::string& path, CloudFormat format);

/// Binary little-endian PLY with per-point uchar RGB color.
void save_ply(const std::string& path, const PointCloud& pc,
              const std::vector<std::array<std::uint8_t, 3>>* colors = nullptr);

/// Dispatch on extension (.xyz / .bin / .ply) or explicit format. Auto binary
/// loads try the 3-column stride first, then 4-column.
PointCloud load_cloud(const std::string& path, CloudFormat format = CloudFormat::Auto);
void save_cloud(const std::string& path, const PointCloud& pc, CloudFormat format);

CloudFormat format_from_extension(const std::string& path);

/// Flat key=value configuration file: one `key = value` per line, `#`
/// comments, blank lines ignored. Later assignments override earlier ones.
struct KvConfig {
  std::vector<std::pair<std::string, std::string>> entries;  // file order, post-override

  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::string* find(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;

  /// Canonical text (sorted key=value lines); hashed for run metadata.
  std::string canonical() const;
};

std::uint64_t fnv1a64(const std::string& s);

/// Compact numeric formatting for CSV cells (%.9g).
std::string format_float(double v);
/// Full-precision formatting (%.17g): round-trips a double exactly.
std::string format_double(double v);

/// One CSV row; numeric cells should already be formatted via format_float.
void append_csv_row(std::string& out, const std::vector<std::string>& cells);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace pcreal::io
