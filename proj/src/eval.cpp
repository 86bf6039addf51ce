#include "pcreal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pcreal/io.hpp"
#include "pcreal/parallel.hpp"
#include "pcreal/score.hpp"

namespace pcreal::eval {

namespace {

double wrap_azimuth(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

}  // namespace

ProjectResult project(const PointCloud& pc, const ScanPattern& pattern) {
  pattern.validate();
  ProjectResult out;
  RangeImage& img = out.image;
  img.rows = pattern.rows;
  img.cols = pattern.cols;
  img.range.assign(std::size_t(img.rows) * img.cols, RangeImage::kUnmeasured);
  img.measured.assign(img.range.size(), 0);
  img.row_elevation.resize(img.rows);
  img.col_azimuth.resize(img.cols);
  for (int i = 0; i < img.rows; ++i) img.row_elevation[i] = pattern.elevation(i);
  for (int j = 0; j < img.cols; ++j) img.col_azimuth[j] = pattern.azimuth(j);

  const double estep = pattern.elevation_step();
  const double astep = pattern.azimuth_step();
  const bool full_circle = pattern.azimuth_span >= kTwoPi - 1e-12;

  for (const auto& p : pc.points) {
    double r = norm(p);
    if (r <= 0.0) {
      ++out.dropped_points;
      continue;
    }
    double elev = std::asin(std::clamp(double(p.z) / r, -1.0, 1.0));
    double az = wrap_azimuth(std::atan2(double(p.y), double(p.x)));
    long row = pattern.rows == 1 ? 0 : std::lround((elev - pattern.elevation_min) / estep);
    long col = std::lround(az / astep);
    if (full_circle) {
      col %= pattern.cols;
    } else if (col < 0 || col >= pattern.cols) {
      ++out.dropped_points;
      continue;
    }
    if (row < 0 || row >= pattern.rows) {
      ++out.dropped_points;
      continue;
    }
    std::size_t idx = std::size_t(row) * img.cols + col;
    float rf = static_cast<float>(r);
    if (!img.measured[idx] || rf < img.range[idx]) {
      img.range[idx] = rf;
      img.measured[idx] = 1;
    }
  }
  return out;
}

PointCloud unproject(const RangeImage& img) {
  PointCloud pc;
  for (int i = 0; i < img.rows; ++i) {
    double elev = img.row_elevation[i];
    double ce = std::cos(elev), se = std::sin(elev);
    for (int j = 0; j < img.cols; ++j) {
      if (!img.is_measured(i, j)) continue;
      double r = img.at(i, j);
      double az = img.col_azimuth[j];
      pc.points.push_back({r * ce * std::cos(az), r * ce * std::sin(az), r * se});
    }
  }
  return pc;
}

RangeImage bilinear_upsample(const RangeImage& img, int factor) {
  if (factor != 2 && factor != 4 && factor != 8)
    throw std::invalid_argument("bilinear_upsample: factor must be 2, 4 or 8");
  RangeImage out;
  out.rows = img.rows * factor;
  out.cols = img.cols;
  out.range.assign(std::size_t(out.rows) * out.cols, RangeImage::kUnmeasured);
  out.measured.assign(out.range.size(), 0);
  out.col_azimuth = img.col_azimuth;
  out.row_elevation.resize(out.rows);

  for (int i = 0; i < out.rows; ++i) {
    double src = img.rows > 1 ? double(i) * (img.rows - 1) / (out.rows - 1) : 0.0;
    int i0 = static_cast<int>(src);
    double w = src - i0;
    int i1 = w > 0.0 ? i0 + 1 : i0;
    out.row_elevation[i] =
        (1.0 - w) * img.row_elevation[i0] + w * img.row_elevation[i1];
    for (int j = 0; j < out.cols; ++j) {
      bool ok = img.is_measured(i0, j) && (w == 0.0 || img.is_measured(i1, j));
      if (!ok) continue;
      double v = (1.0 - w) * img.at(i0, j) + (w > 0.0 ? w * img.at(i1, j) : 0.0);
      std::size_t idx = std::size_t(i) * out.cols + j;
      out.range[idx] = static_cast<float>(v);
      out.measured[idx] = 1;
    }
  }
  return out;
}

double chamfer(const PointCloud& a, const PointCloud& b, int threads) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer: empty point set");
  auto one_direction = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    std::vector<double> mins(from.size());
    parallel_for(from.size(), threads, [&](std::size_t i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, sq_dist(from[i], q));
      mins[i] = best;
    });
    double s = 0.0;  // fixed-order accumulation
    for (double m : mins) s += m;
    return s / from.size();
  };
  return one_direction(a.points, b.points) + one_direction(b.points, a.points);
}

double masked_error(const RangeImage& pred, const RangeImage& gt, ErrorKind kind) {
  if (pred.rows != gt.rows || pred.cols != gt.cols)
    throw std::invalid_argument("masked_error: shape mismatch");
  double sum = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < pred.range.size(); ++i) {
    if (!pred.measured[i] || !gt.measured[i]) continue;
    double d = double(pred.range[i]) - double(gt.range[i]);
    sum += kind == ErrorKind::MSE ? d * d : std::fabs(d);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("masked_error: empty mask intersection");
  return sum / n;
}

// Range-image container, version 1, little-endian:
//   magic "PCRIMG1\0", u32 rows, u32 cols,
//   f64 row_elevation[rows], f64 col_azimuth[cols],
//   f32 range[rows*cols], mask packed LSB-first (ceil(rows*cols/8) bytes)
namespace {
constexpr char kImgMagic[8] = {'P', 'C', 'R', 'I', 'M', 'G', '1', '\0'};
}

void save_range_image(const std::string& path, const RangeImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file for writing: " + path);
  f.write(kImgMagic, 8);
  std::uint32_t r = img.rows, c = img.cols;
  f.write(reinterpret_cast<const char*>(&r), 4);
  f.write(reinterpret_cast<const char*>(&c), 4);
  f.write(reinterpret_cast<const char*>(img.row_elevation.data()), 8 * img.rows);
  f.write(reinterpret_cast<const char*>(img.col_azimuth.data()), 8 * img.cols);
  f.write(reinterpret_cast<const char*>(img.range.data()),
          static_cast<std::streamsize>(4 * img.range.size()));
  std::vector<std::uint8_t> packed((img.range.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < img.measured.size(); ++i)
    if (img.measured[i]) packed[i / 8] |= std::uint8_t(1u << (i % 8));
  f.write(reinterpret_cast<const char*>(packed.data()),
          static_cast<std::streamsize>(packed.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

RangeImage load_range_image(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kImgMagic, 8) != 0)
    throw std::runtime_error("malformed file '" + path + "' at byte 0: bad magic");
  std::uint32_t r = 0, c = 0;
  f.read(reinterpret_cast<char*>(&r), 4);
  f.read(reinterpret_cast<char*>(&c), 4);
  if (!f || r == 0 || c == 0)
    throw std::runtime_error("malformed file '" + path + "' at byte 8: bad dimensions");
  RangeImage img;
  img.rows = static_cast<int>(r);
  img.cols = static_cast<int>(c);
  img.row_elevation.resize(r);
  img.col_azimuth.resize(c);
  img.range.resize(std::size_t(r) * c);
  f.read(reinterpret_cast<char*>(img.row_elevation.data()), 8 * r);
  f.read(reinterpret_cast<char*>(img.col_azimuth.data()), 8 * c);
  f.read(reinterpret_cast<char*>(img.range.data()),
         static_cast<std::streamsize>(4 * img.range.size()));
  std::vector<std::uint8_t> packed((img.range.size() + 7) / 8);
  f.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!f)
    throw std::runtime_error("malformed file '" + path + "': truncated at byte " +
                             std::to_string(static_cast<long long>(f.gcount())));
  img.measured.resize(img.range.size());
  for (std::size_t i = 0; i < img.measured.size(); ++i)
    img.measured[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return img;
}

std::vector<NoiseSweepRow> noise_sweep(const net::MetricModel& model, const CloudGenerator& gen,
                                       const std::vector<double>& sigmas, int n_clouds,
                                       std::uint64_t seed, int max_points, int threads) {
  std::vector<NoiseSweepRow> rows;
  score::ScoreOptions opts;
  opts.max_points = max_points;
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    double sigma = sigmas[si];
    std::vector<std::array<double, 3>> scene(n_clouds);
    parallel_for(n_clouds, threads, [&](std::size_t i) {
      std::uint64_t s = derive_seed(derive_seed(seed, 0x401E + si), i);
      PointCloud pc = gen(s);
      if (sigma > 0) pc = pcgen::add_range_noise(pc, sigma, derive_seed(s, 0xA0)).cloud;
      scene[i] = score::score_cloud(model, pc, opts).scene;
    });
    NoiseSweepRow row;
    row.sigma = sigma;
    for (int c = 0; c < 3; ++c) {
      double m = 0;
      for (const auto& s : scene) m += s[c];
      m /= n_clouds;
      double v = 0;
      for (const auto& s : scene) v += (s[c] - m) * (s[c] - m);
      row.mean[c] = m;
      row.stddev[c] = n_clouds > 1 ? std::sqrt(v / (n_clouds - 1)) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string noise_sweep_csv(const std::vector<NoiseSweepRow>& rows) {
  std::string out =
      "sigma,real_mean,real_std,synthetic_mean,synthetic_std,misc_mean,misc_std\n";
  for (const auto& r : rows)
    io::append_csv_row(out, {io::format_float(r.sigma), io::format_float(r.mean[0]),
                             io::format_float(r.stddev[0]), io::format_float(r.mean[1]),
                             io::format_float(r.stddev[1]), io::format_float(r.mean[2]),
                             io::format_float(r.stddev[2])});
  return out;
}

}  // namespace pcreal::eval
