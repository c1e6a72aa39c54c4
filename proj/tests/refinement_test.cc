#include "planemerge/refinement.h"

#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "planemerge/error.h"
#include "test_support.h"

namespace planemerge {
namespace {

const Eigen::Matrix3d kK = Intrinsics::FromFocal(500, 500, 320, 240).k;
const Intrinsics kIntrinsics{kK};

Motion TrueMotion() {
  Motion m;
  m.rotation = Eigen::AngleAxisd(0.06, Eigen::Vector3d(0.1, 1, 0.2).normalized()).toRotationMatrix();
  m.translation = {0.15, 0.02, 0.04};
  return m;
}

std::vector<Eigen::Vector2d> RandomPoints(int n, std::mt19937_64& rng, double w = 640,
                                          double h = 480) {
  std::uniform_real_distribution<double> ux(0, w), uy(0, h);
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(ux(rng), uy(rng));
  return pts;
}

// Signed incircle determinant of p against counter-clockwise (a, b, c),
// evaluated in long double around p.
long double InCircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                     const Eigen::Vector2d& p) {
  const long double ax = a.x() - p.x(), ay = a.y() - p.y();
  const long double bx = b.x() - p.x(), by = b.y() - p.y();
  const long double cx = c.x() - p.x(), cy = c.y() - p.y();
  return (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay) +
         (cx * cx + cy * cy) * (ax * by - bx * ay);
}

long double Orient(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return static_cast<long double>(b.x() - a.x()) * (c.y() - a.y()) -
         static_cast<long double>(b.y() - a.y()) * (c.x() - a.x());
}

TEST(DelaunayTriangulate, SingleTriangle) {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {10, 0}, {0, 10}};
  const MatchGraph g = DelaunayTriangulate(pts);
  EXPECT_EQ(g.edges.size(), 3u);
  EXPECT_EQ(g.triangles.size(), 1u);
}

TEST(DelaunayTriangulate, ConvexQuadHasFiveEdges) {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {10, 1}, {11, 9}, {-1, 10}};
  const MatchGraph g = DelaunayTriangulate(pts);
  EXPECT_EQ(g.edges.size(), 5u);
  EXPECT_EQ(g.triangles.size(), 2u);
}

TEST(DelaunayTriangulate, EmptyCircumcircleOracle) {
  std::mt19937_64 rng(1);
  const auto pts = RandomPoints(200, rng);
  const MatchGraph g = DelaunayTriangulate(pts);
  // Euler: a triangulation of n points with h hull vertices has 2n - 2 - h
  // triangles and 3n - 3 - h edges.
  ASSERT_FALSE(g.triangles.empty());
  EXPECT_EQ(static_cast<long>(g.edges.size()) - static_cast<long>(g.triangles.size()), 200 - 1);
  for (const auto& t : g.triangles) {
    Eigen::Vector2d a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
    if (Orient(a, b, c) < 0) std::swap(b, c);
    ASSERT_GT(Orient(a, b, c), 0);
    for (size_t p = 0; p < pts.size(); ++p) {
      if (static_cast<int>(p) == t[0] || static_cast<int>(p) == t[1] || static_cast<int>(p) == t[2])
        continue;
      EXPECT_LE(InCircle(a, b, c, pts[p]), 1e-6L) << "point " << p << " inside circumcircle";
    }
  }
  // Every triangle side is a graph edge.
  std::set<std::pair<int, int>> edges(g.edges.begin(), g.edges.end());
  for (const auto& t : g.triangles) {
    for (int s = 0; s < 3; ++s) {
      const int a = std::min(t[s], t[(s + 1) % 3]), b = std::max(t[s], t[(s + 1) % 3]);
      EXPECT_TRUE(edges.count({a, b}));
    }
  }
}

TEST(DelaunayTriangulate, CollinearFallsBackToChain) {
  std::vector<Eigen::Vector2d> pts;
  for (int i : {3, 0, 4, 1, 2}) pts.emplace_back(2.0 * i, 1.0 * i);
  const MatchGraph g = DelaunayTriangulate(pts);
  EXPECT_TRUE(g.triangles.empty());
  // Chain along the line: 0-1, 1-2, 2-3, 3-4 in line order.
  const std::vector<std::pair<int, int>> expected{{0, 2}, {0, 4}, {1, 3}, {3, 4}};
  EXPECT_EQ(g.edges, expected);
}

TEST(DelaunayTriangulate, DuplicatesGetZeroLengthEdges) {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {10, 0}, {0, 10}, {10, 0}};
  const MatchGraph g = DelaunayTriangulate(pts);
  bool found = false;
  for (size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e] == std::make_pair(1, 3)) {
      found = true;
      EXPECT_EQ(g.lengths[e], 0.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(DelaunayTriangulate, TooFewPoints) {
  const std::vector<Eigen::Vector2d> pts{{0, 0}, {1, 1}};
  try {
    DelaunayTriangulate(pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewPoints);
  }
}

// Oracle partition: breadth-first flood fill over short same-label edges.
std::vector<std::set<int>> FloodFill(const MatchGraph& g, const PatchLabeling& in,
                                     double threshold) {
  std::vector<std::vector<int>> adj(g.node_count);
  for (size_t e = 0; e < g.edges.size(); ++e) {
    const auto [a, b] = g.edges[e];
    if (g.lengths[e] <= threshold && in.labels[a] != kOutlier && in.labels[a] == in.labels[b]) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  std::vector<bool> seen(g.node_count, false);
  std::vector<std::set<int>> comps;
  for (size_t s = 0; s < g.node_count; ++s) {
    if (seen[s] || in.labels[s] == kOutlier) continue;
    std::set<int> comp;
    std::queue<int> q;
    q.push(static_cast<int>(s));
    seen[s] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      comp.insert(u);
      for (int v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          q.push(v);
        }
      }
    }
    if (comp.size() >= 10) comps.push_back(comp);
  }
  return comps;
}

std::vector<std::set<int>> AsSets(const PatchLabeling& l) {
  std::vector<std::set<int>> out;
  for (const auto& m : l.Members()) out.emplace_back(m.begin(), m.end());
  return out;
}

TEST(CutMeshByDistance, HugeThresholdKeepsPatch) {
  std::mt19937_64 rng(2);
  const auto pts = RandomPoints(60, rng, 100, 100);
  const MatchGraph g = DelaunayTriangulate(pts);
  const PatchLabeling in = CompactLabels(std::vector<int>(60, 0));
  const PatchLabeling out = CutMeshByDistance(g, in, 1e6);
  EXPECT_EQ(out.labels, in.labels);
}

TEST(CutMeshByDistance, TwoBlobsSplit) {
  std::mt19937_64 rng(3);
  auto pts = RandomPoints(50, rng, 60, 60);
  for (const auto& p : RandomPoints(50, rng, 60, 60)) pts.push_back(p + Eigen::Vector2d(500, 0));
  const MatchGraph g = DelaunayTriangulate(pts);
  const PatchLabeling in = CompactLabels(std::vector<int>(100, 0));
  const PatchLabeling out = CutMeshByDistance(g, in, 100);
  EXPECT_EQ(out.patch_count, 2);
  EXPECT_EQ(AsSets(out), FloodFill(g, in, 100));
}

TEST(CutMeshByDistance, SmallPatchBecomesOutlier) {
  std::mt19937_64 rng(4);
  const auto pts = RandomPoints(9, rng, 50, 50);
  const MatchGraph g = DelaunayTriangulate(pts);
  const PatchLabeling out = CutMeshByDistance(g, CompactLabels(std::vector<int>(9, 0)), 1e6);
  EXPECT_EQ(out.patch_count, 0);
  for (int l : out.labels) EXPECT_EQ(l, kOutlier);
}

TEST(CutMeshByDistance, ContractOnRandomLabelings) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = RandomPoints(300, rng);
    const MatchGraph g = DelaunayTriangulate(pts);
    std::vector<int> labels(300);
    for (size_t i = 0; i < 300; ++i) {
      // Vertical bands with some outliers.
      labels[i] = (rng() % 20 == 0) ? kOutlier : static_cast<int>(pts[i].x() / 160);
    }
    const PatchLabeling in = CompactLabels(labels);
    const double threshold = DefaultCutThreshold(g);
    const PatchLabeling out = CutMeshByDistance(g, in, threshold);
    EXPECT_EQ(AsSets(out), FloodFill(g, in, threshold));
    for (const auto& m : out.Members()) EXPECT_GE(m.size(), 10u);
    for (size_t i = 0; i < 300; ++i) {
      if (in.labels[i] == kOutlier) EXPECT_EQ(out.labels[i], kOutlier);
    }
    // New patches never straddle old ones.
    for (const auto& m : out.Members()) {
      for (int i : m) EXPECT_EQ(in.labels[i], in.labels[m.front()]);
    }
  }
}

TEST(PatchPlaneModel, NoiselessRoundTrip) {
  std::mt19937_64 rng(6);
  const testing::PlaneView plane{Eigen::Vector3d(0.2, -0.3, 1).normalized(), 2.5};
  const Matches m = testing::SamplePlaneMatches(plane, TrueMotion(), kK, 60, 0.0, rng);
  std::vector<int> members(60);
  std::iota(members.begin(), members.end(), 0);
  PlaneModelOptions opt;
  opt.motion_prior = TrueMotion();
  const PlanarPatch p = PatchPlaneModel(0, members, m, kIntrinsics, opt);
  ASSERT_TRUE(p.valid);
  EXPECT_LT(testing::Degrees(AngleBetween(p.normal(), plane.normal)), 1e-4);
}

TEST(PatchPlaneModel, NineMembersIsInvalid) {
  std::mt19937_64 rng(7);
  const testing::PlaneView plane{Eigen::Vector3d(0, 0, 1), 2.0};
  const Matches m = testing::SamplePlaneMatches(plane, TrueMotion(), kK, 9, 0.0, rng);
  const std::vector<int> members{0, 1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_FALSE(PatchPlaneModel(0, members, m, kIntrinsics).valid);
}

TEST(PatchPlaneModel, NoisyCornerNormals) {
  std::mt19937_64 rng(8);
  const testing::PlaneView planes[] = {{Eigen::Vector3d(0.7, 0, 0.714).normalized(), 2.0},
                                       {Eigen::Vector3d(-0.7, 0, 0.714).normalized(), 2.0},
                                       {Eigen::Vector3d(0, -0.8, 0.6).normalized(), 1.2}};
  const Eigen::Vector2d lo[] = {{0, 0}, {340, 0}, {0, 320}};
  const Eigen::Vector2d hi[] = {{300, 300}, {640, 300}, {640, 480}};
  for (int k = 0; k < 3; ++k) {
    const Matches m = testing::SamplePlaneMatches(planes[k], TrueMotion(), kK, 300, 0.5, rng, 640,
                                                  480, lo[k], hi[k]);
    std::vector<int> members(m.size());
    std::iota(members.begin(), members.end(), 0);
    PlaneModelOptions opt;
    opt.motion_prior = TrueMotion();
    const PlanarPatch p = PatchPlaneModel(k, members, m, kIntrinsics, opt);
    ASSERT_TRUE(p.valid);
    EXPECT_LT(testing::Degrees(AngleBetween(p.normal(), planes[k].normal)), 10.0) << "plane " << k;
  }
}

TEST(LocalNormal, InteriorMatchOfCleanPlane) {
  std::mt19937_64 rng(9);
  const testing::PlaneView plane{Eigen::Vector3d(0.3, 0.1, 1).normalized(), 2.0};
  const Matches m = testing::SamplePlaneMatches(plane, TrueMotion(), kK, 300, 0.0, rng);
  const PatchLabeling patches = CompactLabels(std::vector<int>(m.size(), 0));
  size_t centre = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    if ((m[i].x - Eigen::Vector2d(320, 240)).norm() < (m[centre].x - Eigen::Vector2d(320, 240)).norm())
      centre = i;
  }
  const LocalNormal n =
      ComputeLocalNormal(static_cast<int>(centre), patches, m, {}, kIntrinsics, TrueMotion());
  ASSERT_TRUE(n.reliable());
  EXPECT_EQ(n.neighborhood.size(), 11u);
  EXPECT_EQ(n.neighborhood.front(), static_cast<int>(centre));
  EXPECT_LT(testing::Degrees(AngleBetween(*n.normal, plane.normal)), 5.0);
}

TEST(LocalNormal, SmallPatches) {
  std::mt19937_64 rng(10);
  const testing::PlaneView plane{Eigen::Vector3d(0.3, 0.1, 1).normalized(), 2.0};
  const Matches m = testing::SamplePlaneMatches(plane, TrueMotion(), kK, 8, 0.0, rng);
  std::vector<int> labels{0, 0, 0, 0, 0, 1, 1, 1};
  const PatchLabeling patches = CompactLabels(labels);
  const LocalNormal five = ComputeLocalNormal(0, patches, m, {}, kIntrinsics, TrueMotion());
  EXPECT_EQ(five.neighborhood.size(), 5u);
  EXPECT_TRUE(five.reliable());
  const LocalNormal three = ComputeLocalNormal(5, patches, m, {}, kIntrinsics, TrueMotion());
  EXPECT_EQ(three.neighborhood.size(), 3u);
  EXPECT_FALSE(three.reliable());
  labels[0] = kOutlier;
  const LocalNormal outlier = ComputeLocalNormal(0, CompactLabels(labels), m, {}, kIntrinsics);
  EXPECT_TRUE(outlier.neighborhood.empty());
  EXPECT_FALSE(outlier.reliable());
}

TEST(LocalNormal, PureRotationIsUnreliable) {
  std::mt19937_64 rng(11);
  Motion rot = TrueMotion();
  rot.translation.setZero();
  const testing::PlaneView plane{Eigen::Vector3d(0.3, 0.1, 1).normalized(), 2.0};
  const Matches m = testing::SamplePlaneMatches(plane, rot, kK, 30, 0.0, rng);
  const PatchLabeling patches = CompactLabels(std::vector<int>(m.size(), 0));
  EXPECT_FALSE(ComputeLocalNormal(0, patches, m, {}, kIntrinsics).reliable());
}

// The fraction depends on the baseline-to-depth ratio; this uses a 20 cm
// baseline at 1.2-2 m plane distance.
TEST(LocalNormal, MostInteriorNormalsAreCorrect) {
  std::mt19937_64 rng(12);
  Motion motion = TrueMotion();
  motion.translation = motion.translation.normalized() * 0.2;
  const testing::PlaneView planes[] = {{Eigen::Vector3d(0.7, 0, 0.714).normalized(), 2.0},
                                       {Eigen::Vector3d(-0.7, 0, 0.714).normalized(), 2.0},
                                       {Eigen::Vector3d(0, -0.8, 0.6).normalized(), 1.2}};
  const Eigen::Vector2d lo[] = {{0, 0}, {340, 0}, {0, 320}};
  const Eigen::Vector2d hi[] = {{300, 300}, {640, 300}, {640, 480}};
  int good = 0, total = 0;
  for (int k = 0; k < 3; ++k) {
    const Matches m = testing::SamplePlaneMatches(planes[k], motion, kK, 300, 0.5, rng, 640,
                                                  480, lo[k], hi[k]);
    const PatchLabeling patches = CompactLabels(std::vector<int>(m.size(), 0));
    const auto normals = ComputeLocalNormals(patches, m, {}, kIntrinsics, motion);
    for (size_t i = 0; i < m.size(); ++i) {
      // Interior: at least 30 px from the sampling region border.
      const Eigen::Vector2d& x = m[i].x;
      if ((x - lo[k]).minCoeff() < 30 || (hi[k] - x).minCoeff() < 30) continue;
      ++total;
      if (normals[i].reliable() &&
          testing::Degrees(AngleBetween(*normals[i].normal, planes[k].normal)) < 10.0)
        ++good;
    }
  }
  ASSERT_GT(total, 100);
  EXPECT_GE(good, 0.8 * total) << good << " of " << total;
}

TEST(LocalPatchConfig, Validation) {
  EXPECT_THROW(ValidateLocalPatchConfig({3}), Error);
  EXPECT_NO_THROW(ValidateLocalPatchConfig({4}));
}

}  // namespace
}  // namespace planemerge
