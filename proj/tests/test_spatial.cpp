#include <doctest.h>

#include <algorithm>
#include <set>

#include "pcreal/rng.hpp"
#include "pcreal/spatial.hpp"

using namespace pcreal;
using namespace pcreal::spatial;

namespace {

std::vector<Vec3> random_points(int n, std::uint64_t seed, double lo = -10, double hi = 10) {
  SplitMix64 rng(seed);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return pts;
}

/// Independent FPS oracle: recomputes min distances from scratch each pick
/// instead of maintaining a running array.
std::vector<Vec3> fps_oracle(const std::vector<Vec3>& pts, int m) {
  std::size_t take = std::min<std::size_t>(m, pts.size());
  std::vector<Vec3> sel;
  Vec3 centroid = stable_centroid(pts);
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double di = sq_dist(pts[i], centroid), db = sq_dist(pts[best], centroid);
    if (di > db || (di == db && lex_less(pts[i], pts[best]))) best = i;
  }
  std::vector<char> used(pts.size(), 0);
  used[best] = 1;
  sel.push_back(pts[best]);
  while (sel.size() < take) {
    double best_d = -1.0;
    std::size_t arg = 0;
    bool found = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& s : sel) d = std::min(d, sq_dist(pts[i], s));
      if (!found || d > best_d || (d == best_d && lex_less(pts[i], pts[arg]))) {
        best_d = d;
        arg = i;
        found = true;
      }
    }
    used[arg] = 1;
    sel.push_back(pts[arg]);
  }
  return sel;
}

/// Exhaustive KNN oracle via full sort.
std::vector<Vec3> knn_oracle_row(const std::vector<Vec3>& pts, const Vec3& q, int k) {
  std::vector<Vec3> sorted = pts;
  std::sort(sorted.begin(), sorted.end(), [&](const Vec3& a, const Vec3& b) {
    double da = sq_dist(a, q), db = sq_dist(b, q);
    if (da != db) return da < db;
    return lex_less(a, b);
  });
  sorted.resize(std::min<std::size_t>(k, sorted.size()));
  return sorted;
}

bool same_coords(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i])) return false;
  return true;
}

std::vector<Vec3> sorted_coords(std::vector<Vec3> v) {
  std::sort(v.begin(), v.end(), lex_less);
  return v;
}

}  // namespace

TEST_CASE("fps picks the documented points on the hand example") {
  std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {10, 10, 10}};
  auto qs = farthest_point_sampling(pts, 2);
  REQUIRE(qs.indices.size() == 2);
  CHECK(pts[qs.indices[0]] == Vec3{10, 10, 10});
  CHECK(pts[qs.indices[1]] == Vec3{0, 0, 0});
}

TEST_CASE("fps m >= N returns all points; single point works for any m") {
  auto pts = random_points(17, 42);
  auto qs = farthest_point_sampling(pts, 17);
  CHECK(qs.indices.size() == 17);
  std::set<int> uniq(qs.indices.begin(), qs.indices.end());
  CHECK(uniq.size() == 17);

  std::vector<Vec3> one{{1, 2, 3}};
  auto q1 = farthest_point_sampling(one, 5);
  REQUIRE(q1.indices.size() == 1);
  CHECK(q1.indices[0] == 0);

  CHECK_THROWS_AS(farthest_point_sampling(std::vector<Vec3>{}, 1), std::invalid_argument);
}

TEST_CASE("fps matches the exhaustive greedy oracle") {
  for (int trial = 0; trial < 60; ++trial) {
    int n = 2 + int(SplitMix64(trial).next_below(100));
    auto pts = random_points(n, 1000 + trial);
    int m = 1 + int(SplitMix64(trial * 7 + 1).next_below(n));
    auto got = gather(pts, farthest_point_sampling(pts, m).indices);
    auto want = fps_oracle(pts, m);
    CHECK(same_coords(got, want));
  }
}

TEST_CASE("fps selection is permutation invariant, bitwise") {
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = random_points(80, 7000 + trial);
    auto sel = sorted_coords(gather(pts, farthest_point_sampling(pts, 12).indices));

    auto shuffled = pts;
    SplitMix64 rng(99 + trial);
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
    auto sel2 = sorted_coords(gather(shuffled, farthest_point_sampling(shuffled, 12).indices));
    CHECK(same_coords(sel, sel2));
  }
}

TEST_CASE("fps handles duplicate points without repeating indices") {
  std::vector<Vec3> pts{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {2, 2, 2}};
  auto qs = farthest_point_sampling(pts, 4);
  std::set<int> uniq(qs.indices.begin(), qs.indices.end());
  CHECK(uniq.size() == 4);
}

TEST_CASE("fps coverage beats random subsets statistically") {
  auto min_pairwise = [](const std::vector<Vec3>& sel) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sel.size(); ++i)
      for (std::size_t j = i + 1; j < sel.size(); ++j) best = std::min(best, sq_dist(sel[i], sel[j]));
    return best;
  };
  int wins = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = random_points(64, 500 + trial);
    auto fps_sel = gather(pts, farthest_point_sampling(pts, 8).indices);
    double fps_d = min_pairwise(fps_sel);
    SplitMix64 rng(800 + trial);
    for (int s = 0; s < 20; ++s) {
      std::vector<Vec3> sub = pts;
      for (std::size_t i = sub.size(); i > 1; --i) std::swap(sub[i - 1], sub[rng.next_below(i)]);
      sub.resize(8);
      ++total;
      if (fps_d >= min_pairwise(sub)) ++wins;
    }
  }
  CHECK(wins == total);  // greedy max-min spread dominates random picks here
}

TEST_CASE("knn finds the documented neighbors") {
  std::vector<Vec3> pts{{1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  std::vector<Vec3> q{{0, 0, 0}};
  auto t = knn(pts, q, 2);
  REQUIRE(t.k == 2);
  CHECK(pts[t.row(0)[0]] == Vec3{1, 0, 0});
  CHECK(pts[t.row(0)[1]] == Vec3{2, 0, 0});

  auto all = knn(pts, q, 10);
  CHECK(all.k == 3);

  CHECK_THROWS_AS(knn(std::vector<Vec3>{}, q, 1), std::invalid_argument);
}

TEST_CASE("knn matches the exhaustive-sort oracle") {
  for (int trial = 0; trial < 30; ++trial) {
    auto pts = random_points(200, 2000 + trial);
    auto queries = random_points(32, 3000 + trial);
    auto t = knn(pts, queries, 10);
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      auto got = gather(pts, t.row(qi));
      auto want = knn_oracle_row(pts, queries[qi], 10);
      CHECK(same_coords(got, want));
    }
  }
}

TEST_CASE("knn neighbor sets are permutation invariant") {
  auto pts = random_points(150, 4242);
  auto queries = random_points(8, 777);
  auto t1 = knn(pts, queries, 10);

  auto shuffled = pts;
  SplitMix64 rng(31337);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
  auto t2 = knn(shuffled, queries, 10);
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    CHECK(same_coords(gather(pts, t1.row(qi)), gather(shuffled, t2.row(qi))));
  }
}

TEST_CASE("a query present in the point set is its own nearest neighbor") {
  auto pts = random_points(50, 5555);
  auto qs = farthest_point_sampling(pts, 5);
  auto qpts = gather(pts, qs.indices);
  auto t = knn(pts, qpts, 3);
  for (std::size_t i = 0; i < qpts.size(); ++i) CHECK(pts[t.row(i)[0]] == qpts[i]);
}

TEST_CASE("group_normalize subtracts the query and orders canonically") {
  std::vector<Vec3> pts{{2, 0, 0}, {1, 0, 0}, {5, 5, 5}};
  std::vector<Vec3> q{{1, 0, 0}};
  auto t = knn(pts, q, 2);
  auto blocks = group_normalize(pts, q, t);
  REQUIRE(blocks.size() == 6);
  // self first (distance 0), then (2,0,0) - (1,0,0) = (1,0,0)
  CHECK(blocks[0] == 0.0);
  CHECK(blocks[1] == 0.0);
  CHECK(blocks[2] == 0.0);
  CHECK(blocks[3] == 1.0);
  CHECK(blocks[4] == 0.0);
  CHECK(blocks[5] == 0.0);
}

TEST_CASE("group_normalize is invariant under global translation") {
  // grid-snapped coordinates keep the translated sums exact
  SplitMix64 rng(606);
  std::vector<Vec3> pts(120);
  for (auto& p : pts)
    p = {0.25 * double(int(rng.next_below(801)) - 400), 0.25 * double(int(rng.next_below(801)) - 400),
         0.25 * double(int(rng.next_below(801)) - 400)};
  Vec3 shift{5.25, -3.5, 7.75};
  std::vector<Vec3> moved(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) moved[i] = pts[i] + shift;

  auto q1 = farthest_point_sampling(pts, 10);
  auto q2 = farthest_point_sampling(moved, 10);
  auto qp1 = gather(pts, q1.indices);
  auto qp2 = gather(moved, q2.indices);
  auto t1 = knn(pts, qp1, 5);
  auto t2 = knn(moved, qp2, 5);
  auto b1 = group_normalize(pts, qp1, t1);
  auto b2 = group_normalize(moved, qp2, t2);
  REQUIRE(b1.size() == b2.size());
  for (std::size_t i = 0; i < b1.size(); ++i) CHECK(b1[i] == b2[i]);
}

TEST_CASE("hash_subsample is a function of the point set") {
  auto pts = random_points(500, 12);
  auto a = sorted_coords(hash_subsample(pts, 100, 9));

  auto shuffled = pts;
  SplitMix64 rng(77);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
  auto b = sorted_coords(hash_subsample(shuffled, 100, 9));
  CHECK(same_coords(a, b));

  CHECK(hash_subsample(pts, 1000, 9).size() == pts.size());
}
