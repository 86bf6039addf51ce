#include "pcreal/spatial.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "pcreal/rng.hpp"

namespace pcreal::spatial {

namespace {

/// (distance, point) comparison used by both FPS and KNN. Distances are
/// compared first; exact ties fall back to lexicographic coordinates so the
/// outcome never depends on input order.
bool dist_point_less(double da, const Vec3& a, double db, const Vec3& b) {
  if (da != db) return da < db;
  return lex_less(a, b);
}

}  // namespace

Vec3 stable_centroid(std::span<const Vec3> points) {
  // sorted summation makes the result independent of input order
  std::vector<double> c(points.size());
  double sums[3];
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < points.size(); ++i)
      c[i] = a == 0 ? points[i].x : (a == 1 ? points[i].y : points[i].z);
    std::sort(c.begin(), c.end());
    double s = 0.0;
    for (double v : c) s += v;
    sums[a] = s / points.size();
  }
  return {sums[0], sums[1], sums[2]};
}

QuerySet farthest_point_sampling(std::span<const Vec3> points, int m) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("farthest_point_sampling: empty input");
  if (m < 1) throw std::invalid_argument("farthest_point_sampling: m must be >= 1");
  const std::size_t take = std::min<std::size_t>(m, n);

  // SoA copies keep the hot loops vectorizable
  std::vector<double> xs(n), ys(n), zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i].x;
    ys[i] = points[i].y;
    zs[i] = points[i].z;
  }

  QuerySet qs;
  qs.indices.reserve(take);

  // first pick: farthest from the centroid
  Vec3 centroid = stable_centroid(points);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = sq_dist(points[i], centroid);
    if (d > best_d || (d == best_d && lex_less(points[i], points[best]))) {
      best = i;
      best_d = d;
    }
  }
  qs.indices.push_back(static_cast<int>(best));

  // min_d of a selected point is pinned to -1 so it can never win the argmax
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t last = best;
  min_d[best] = -1.0;
  for (std::size_t pick = 1; pick < take; ++pick) {
    const double lx = xs[last], ly = ys[last], lz = zs[last];
    double* __restrict md = min_d.data();
    const double* __restrict px = xs.data();
    const double* __restrict py = ys.data();
    const double* __restrict pz = zs.data();
    // pass 1: fold the new point into the running min distances (vectorizes)
    for (std::size_t i = 0; i < n; ++i) {
      double dx = px[i] - lx, dy = py[i] - ly, dz = pz[i] - lz;
      double d = dx * dx + dy * dy + dz * dz;
      double cur = md[i];
      md[i] = cur < 0.0 ? cur : (d < cur ? d : cur);
    }
    // pass 2: argmax with lexicographic tie-break
    double maxval = -1.0;
    for (std::size_t i = 0; i < n; ++i) maxval = md[i] > maxval ? md[i] : maxval;
    best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (md[i] != maxval) continue;
      if (best == n || lex_less(points[i], points[best])) best = i;
    }
    qs.indices.push_back(static_cast<int>(best));
    min_d[best] = -1.0;
    last = best;
  }
  return qs;
}

NeighborTable knn(std::span<const Vec3> points, std::span<const Vec3> queries, int k) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("knn: empty point set");
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  const int k_eff = static_cast<int>(std::min<std::size_t>(k, n));

  NeighborTable table;
  table.k = k_eff;
  table.indices.resize(queries.size() * std::size_t(k_eff));

  std::vector<double> xs(n), ys(n), zs(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i].x;
    ys[i] = points[i].y;
    zs[i] = points[i].z;
  }

  // distances for one query computed in a vectorizable pass, then a bounded
  // insertion keeps the k best; the threshold makes insertions rare
  std::vector<double> dist(n);
  std::vector<std::pair<double, int>> row(k_eff);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double qx = queries[q].x, qy = queries[q].y, qz = queries[q].z;
    const double* __restrict px = xs.data();
    const double* __restrict py = ys.data();
    const double* __restrict pz = zs.data();
    double* __restrict dd = dist.data();
    for (std::size_t i = 0; i < n; ++i) {
      double dx = px[i] - qx, dy = py[i] - qy, dz = pz[i] - qz;
      dd[i] = dx * dx + dy * dy + dz * dz;
    }
    int filled = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = dd[i];
      if (filled == k_eff) {
        if (d > row[filled - 1].first) continue;
        if (!dist_point_less(d, points[i], row[filled - 1].first, points[row[filled - 1].second]))
          continue;
      }
      int pos = filled < k_eff ? filled : k_eff - 1;
      while (pos > 0 &&
             dist_point_less(d, points[i], row[pos - 1].first, points[row[pos - 1].second])) {
        row[pos] = row[pos - 1];
        --pos;
      }
      row[pos] = {d, static_cast<int>(i)};
      if (filled < k_eff) ++filled;
    }
    for (int j = 0; j < k_eff; ++j) table.indices[q * k_eff + j] = row[j].second;
  }
  return table;
}

std::vector<double> group_normalize(std::span<const Vec3> points, std::span<const Vec3> queries,
                                   const NeighborTable& table) {
  if (table.queries() != queries.size())
    throw std::invalid_argument("group_normalize: table/queries size mismatch");
  std::vector<double> out(queries.size() * std::size_t(table.k) * 3);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const Vec3 qp = queries[q];
    auto r = table.row(q);
    for (int j = 0; j < table.k; ++j) {
      const Vec3& p = points[r[j]];
      std::size_t base = (q * table.k + j) * 3;
      out[base + 0] = p.x - qp.x;
      out[base + 1] = p.y - qp.y;
      out[base + 2] = p.z - qp.z;
    }
  }
  return out;
}

std::vector<Vec3> gather(std::span<const Vec3> points, std::span<const int> indices) {
  std::vector<Vec3> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(points[i]);
  return out;
}

std::vector<Vec3> hash_subsample(std::span<const Vec3> points, std::size_t n,
                                  std::uint64_t seed) {
  if (n >= points.size()) return {points.begin(), points.end()};
  std::vector<std::pair<std::uint64_t, std::size_t>> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::uint64_t bx, by, bz;
    std::memcpy(&bx, &points[i].x, 8);
    std::memcpy(&by, &points[i].y, 8);
    std::memcpy(&bz, &points[i].z, 8);
    std::uint64_t h = mix64(seed ^ bx);
    h = mix64(h ^ by);
    h = mix64(h ^ bz);
    keys[i] = {h, i};
  }
  std::nth_element(keys.begin(), keys.begin() + n, keys.end());
  std::sort(keys.begin(), keys.begin() + n);  // stable result regardless of partition order
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(points[keys[i].second]);
  return out;
}

}  // namespace pcreal::spatial
