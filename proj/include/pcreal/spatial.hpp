#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcreal/geometry.hpp"

namespace pcreal::spatial {

/// Indices into a parent point set selected by farthest-point sampling.
struct QuerySet {
  std::vector<int> indices;
};

/// For each query, indices of its nearest neighbors in the parent set,
/// canonically ordered (ascending distance, ties lexicographic by
/// coordinates). All rows have the same width k_eff = min(k, N).
struct NeighborTable {
  int k = 0;
  std::vector<int> indices;  // queries * k, row-major

  std::span<const int> row(std::size_t q) const {
    return {indices.data() + q * std::size_t(k), std::size_t(k)};
  }
  std::size_t queries() const { return k == 0 ? 0 : indices.size() / k; }
};

/// Greedy max-min selection. The first pick is the point farthest from the
/// centroid; every tie (first pick and later ones) is broken by lexicographic
/// (x, y, z), so the selected point set is a function of the input set only.
/// m >= N returns all points (in selection order).
QuerySet farthest_point_sampling(std::span<const Vec3> points, int m);

/// Exhaustive exact k-nearest-neighbor search; ties broken lexicographically
/// by coordinates. Rows come out canonically ordered.
NeighborTable knn(std::span<const Vec3> points, std::span<const Vec3> queries, int k);

/// Per-query local coordinate blocks [Q x K x 3]: neighbor minus query.
/// Row-major float32, laid out for the feature extractor.
std::vector<double> group_normalize(std::span<const Vec3> points, std::span<const Vec3> queries,
                                   const NeighborTable& table);

/// Helper: gather coordinates by index.
std::vector<Vec3> gather(std::span<const Vec3> points, std::span<const int> indices);

/// Pseudorandom subsample that is a function of the point SET: points are
/// ranked by a hash of their coordinate bits mixed with the seed and the n
/// smallest keys are kept. Returns all points when n >= N.
std::vector<Vec3> hash_subsample(std::span<const Vec3> points, std::size_t n,
                                  std::uint64_t seed);

/// Permutation-invariant centroid: per-coordinate sorted summation in double.
Vec3 stable_centroid(std::span<const Vec3> points);

}  // namespace pcreal::spatial
