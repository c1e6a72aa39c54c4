#include "planemerge/multistructure.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "planemerge/error.h"
#include "planemerge/sampling.h"
#include "test_support.h"

namespace planemerge {
namespace {

const Eigen::Matrix3d kK = Intrinsics::FromFocal(500, 500, 320, 240).k;

Motion SmallMotion() {
  Motion m;
  m.rotation = Eigen::AngleAxisd(0.05, Eigen::Vector3d(0.2, 1, 0.1).normalized()).toRotationMatrix();
  m.translation = {0.2, 0.02, 0.03};
  return m;
}

// Left wall, floor and right wall, each confined to its own image region.
Matches CornerScene(std::mt19937_64& rng, int per_plane, int outliers, double noise) {
  const Motion motion = SmallMotion();
  const testing::PlaneView left{Eigen::Vector3d(0.7, 0, 0.714).normalized(), 2.0};
  const testing::PlaneView right{Eigen::Vector3d(-0.7, 0, 0.714).normalized(), 2.0};
  const testing::PlaneView floor{Eigen::Vector3d(0, -0.8, 0.6).normalized(), 1.2};
  Matches m = testing::SamplePlaneMatches(left, motion, kK, per_plane, noise, rng, 640, 480,
                                          {0, 0}, {300, 300}, 0, 0);
  Matches r = testing::SamplePlaneMatches(right, motion, kK, per_plane, noise, rng, 640, 480,
                                          {340, 0}, {640, 300}, 1000, 1);
  Matches f = testing::SamplePlaneMatches(floor, motion, kK, per_plane, noise, rng, 640, 480,
                                          {0, 320}, {640, 480}, 2000, 2);
  m.insert(m.end(), r.begin(), r.end());
  m.insert(m.end(), f.begin(), f.end());
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
  for (int i = 0; i < outliers; ++i) {
    Correspondence c;
    c.id = 5000 + i;
    c.x = {ux(rng), uy(rng)};
    c.x_prime = {ux(rng), uy(rng)};
    c.gt_plane = kOutlier;
    m.push_back(c);
  }
  return m;
}

// Fraction of a patch's members sharing the most common ground-truth label.
double Purity(const std::vector<int>& members, const Matches& m) {
  std::map<int, int> count;
  for (int i : members) ++count[*m[static_cast<size_t>(i)].gt_plane];
  int best = 0;
  for (const auto& [label, c] : count) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(members.size());
}

OrkWeights Weights(int m, int h, std::vector<double> z = {}) {
  OrkConfig cfg;
  cfg.step = h;
  cfg.z = std::move(z);
  return OrkWeights::Resolve(cfg, static_cast<size_t>(m));
}

// Brute-force kernel: explicit prefix sets for every cut point.
double OrkOracle(const std::vector<int>& a, const std::vector<int>& b, int h,
                 const std::vector<double>& z) {
  const int steps = static_cast<int>(a.size()) / h;
  double num = 0, big_z = 0;
  int previous = 0;
  for (int t = 1; t <= steps; ++t) {
    std::set<int> pa(a.begin(), a.begin() + t * h);
    std::set<int> pb(b.begin(), b.begin() + t * h);
    std::vector<int> inter;
    std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(inter));
    const int shared = static_cast<int>(inter.size());
    num += z[static_cast<size_t>(t - 1)] * (shared - previous) / static_cast<double>(h);
    big_z += z[static_cast<size_t>(t - 1)];
    previous = shared;
  }
  return num / big_z;
}

std::vector<int> RandomPermutation(int m, std::mt19937_64& rng) {
  std::vector<int> p(static_cast<size_t>(m));
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

TEST(OrderedResidues, SingleHypothesis) {
  const std::vector<double> r{4.0, 0.5, 2.0};
  const OrderedResidues o(3, 1, r);
  for (size_t i = 0; i < 3; ++i) EXPECT_EQ(o.Order(i)[0], 0);
}

TEST(OrderedResidues, DirectSort) {
  const std::vector<double> r{3.0, 1.0, 2.0};
  const OrderedResidues o(1, 3, r);
  EXPECT_EQ(std::vector<int>(o.Order(0).begin(), o.Order(0).end()), (std::vector<int>{1, 2, 0}));
  EXPECT_EQ(std::vector<double>(o.Sorted(0).begin(), o.Sorted(0).end()),
            (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(o.Best(0), 1.0);
}

TEST(OrderedResidues, TiesGoToLowerIndex) {
  const std::vector<double> r{2.0, 1.0, 2.0, 1.0};
  const OrderedResidues o(1, 4, r);
  EXPECT_EQ(std::vector<int>(o.Order(0).begin(), o.Order(0).end()),
            (std::vector<int>{1, 3, 0, 2}));
}

TEST(OrderedResidues, MatchesSelectionSortOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> val(0, 30);  // coarse values force ties
  const size_t n = 20, m = 50;
  std::vector<double> r(n * m);
  for (double& v : r) v = val(rng) * 0.25;
  const OrderedResidues o(n, m, r);
  for (size_t i = 0; i < n; ++i) {
    std::vector<bool> used(m, false);
    for (size_t pos = 0; pos < m; ++pos) {
      size_t pick = m;
      for (size_t j = 0; j < m; ++j) {
        if (!used[j] && (pick == m || r[i * m + j] < r[i * m + pick])) pick = j;
      }
      used[pick] = true;
      ASSERT_EQ(o.Order(i)[pos], static_cast<int>(pick));
      ASSERT_EQ(o.Rank(i)[pick], static_cast<int>(pos));
    }
  }
}

TEST(Doik, HandExample) {
  const std::vector<int> a{0, 1, 2, 3}, b{2, 3, 0, 1};
  const OrkWeights w = Weights(4, 2);
  EXPECT_EQ(Doik(a, b, 1, w), 0.0);
  EXPECT_EQ(Doik(a, b, 2, w), 2.0);
}

TEST(Doik, IdenticalAndDisjoint) {
  std::mt19937_64 rng(4);
  const std::vector<int> a = RandomPermutation(40, rng);
  const OrkWeights w = Weights(40, 5);
  for (int t = 1; t <= w.steps; ++t) EXPECT_EQ(Doik(a, a, t, w), 1.0);
  std::vector<int> b(a.rbegin(), a.rend());
  for (int t = 1; t <= 4; ++t) EXPECT_EQ(Doik(a, b, t, w), 0.0);  // 2 * 5t <= 40
  EXPECT_THROW(Doik(a, b, 0, w), Error);
  EXPECT_THROW(Doik(a, b, w.steps + 1, w), Error);
}

TEST(OrkKernel, ReversedPermutationsSmallOracle) {
  const std::vector<int> a{0, 1, 2, 3}, b{3, 2, 1, 0};
  const std::vector<double> z{1.0, 0.5};
  const OrkWeights w = Weights(4, 2, z);
  EXPECT_DOUBLE_EQ(OrkKernel(a, b, w), OrkOracle(a, b, 2, z));
  EXPECT_DOUBLE_EQ(OrkKernel(a, b, w), 2.0 / 3.0);
}

TEST(OrkKernel, SelfOneSymmetricBounded) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 20 + trial;
    const int h = 1 + trial % 7;
    const OrkWeights w = Weights(m, h);
    const std::vector<int> a = RandomPermutation(m, rng);
    const std::vector<int> b = RandomPermutation(m, rng);
    EXPECT_EQ(OrkKernel(a, a, w), 1.0);
    EXPECT_EQ(OrkKernel(a, b, w), OrkKernel(b, a, w));
    EXPECT_GE(OrkKernel(a, b, w), 0.0);
    EXPECT_LE(OrkKernel(a, b, w), 1.0);
    EXPECT_NEAR(OrkKernel(a, b, w), OrkOracle(a, b, w.step, w.z), 1e-12);
  }
}

TEST(OrkWeights, Defaults) {
  const OrkWeights w = Weights(500, 0);
  EXPECT_EQ(w.step, 25);
  EXPECT_EQ(w.steps, 20);
  double z = 0;
  for (int t = 1; t <= 20; ++t) z += 1.0 / t;
  EXPECT_DOUBLE_EQ(w.big_z, z);
  EXPECT_THROW(Weights(10, 2, {1.0, -1.0, 1.0, 1.0, 1.0}), Error);
  EXPECT_THROW(Weights(10, 2, {1.0}), Error);
}

TEST(KernelMatrix, DuplicateRows) {
  const std::vector<double> r{1.0, 2.0, 3.0, 1.0, 2.0, 3.0};
  const OrderedResidues o(2, 3, r);
  const Eigen::MatrixXd k = KernelMatrix(o, Weights(3, 1));
  EXPECT_TRUE(k.isApprox(Eigen::MatrixXd::Ones(2, 2), 0.0));
}

TEST(KernelMatrix, PositiveSemidefinite) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 10);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 5 + trial % 30, m = 40 + 3 * static_cast<size_t>(trial);
    std::vector<double> r(n * m);
    for (double& v : r) v = u(rng);
    const OrderedResidues o(n, m, r);
    const Eigen::MatrixXd k = KernelMatrix(o, Weights(static_cast<int>(m), 1 + trial % 9));
    ASSERT_TRUE(k.isApprox(k.transpose(), 0.0));
    const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues()(0);
    EXPECT_GE(min_eig, -1e-8) << "trial " << trial;
  }
}

TEST(KernelMatrix, WithinPlaneExceedsCrossPlane) {
  std::mt19937_64 rng(7);
  const Matches all = CornerScene(rng, 30, 0, 0.3);
  const Matches m(all.begin(), all.begin() + 60);  // left and right walls only
  SamplingConfig sc;
  sc.m = 200;
  sc.seed = 1;
  const HypothesisSet hyps = SampleLocalHypotheses(m, sc);
  const OrderedResidues o = ComputeOrderedResidues(m, hyps.Homographies());
  const Eigen::MatrixXd k = KernelMatrix(o, OrkWeights::Resolve({}, o.hypothesis_count()));
  double within = 0, cross = 0;
  int nw = 0, nc = 0;
  for (size_t i = 0; i < m.size(); ++i) {
    for (size_t j = 0; j < m.size(); ++j) {
      if (i == j) continue;
      if (*m[i].gt_plane == *m[j].gt_plane) {
        within += k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        ++nw;
      } else {
        cross += k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        ++nc;
      }
    }
  }
  EXPECT_GT(within / nw, cross / nc);
}

TEST(EigengapClusterCount, PicksLargestGap) {
  const std::vector<double> s{1.0, 0.98, 0.97, 0.4, 0.3, 0.2};
  EXPECT_EQ(EigengapClusterCount(s, 12), 3);
  EXPECT_EQ(EigengapClusterCount(s, 2), 1);
  EXPECT_EQ(EigengapClusterCount(std::vector<double>{1.0, 0.9, 0.1}, 1), 1);
  EXPECT_EQ(EigengapClusterCount(std::vector<double>{1.0}, 12), 1);
}

TEST(InitialPatches, SingleCleanPlane) {
  std::mt19937_64 rng(8);
  const testing::PlaneView plane{Eigen::Vector3d(0.1, -0.2, 1).normalized(), 2.5};
  const Matches m = testing::SamplePlaneMatches(plane, SmallMotion(), kK, 150, 0.0, rng);
  SamplingConfig sc;
  sc.m = 100;
  const HypothesisSet hyps = SampleLocalHypotheses(m, sc);
  const InitialPatchReport rep = InitialPatches(m, hyps.hypotheses, {}, {});
  EXPECT_EQ(rep.labeling.patch_count, 1);
  for (int l : rep.labeling.labels) EXPECT_EQ(l, 0);
}

TEST(InitialPatches, CornerSceneIsPure) {
  std::mt19937_64 rng(9);
  const Matches m = CornerScene(rng, 200, 30, 0.5);
  SamplingConfig sc;
  sc.m = 500;
  sc.seed = 2;
  const HypothesisSet hyps = SampleLocalHypotheses(m, sc);
  const InitialPatchReport rep = InitialPatches(m, hyps.hypotheses, {}, {});
  EXPECT_GE(rep.labeling.patch_count, 3);
  EXPECT_LE(rep.labeling.patch_count, 8);
  for (const auto& members : rep.labeling.Members()) {
    EXPECT_GE(Purity(members, m), 0.8) << "patch of size " << members.size();
  }
  // Outlier sentinel respects the threshold.
  const OrderedResidues o = ComputeOrderedResidues(m, hyps.Homographies());
  for (size_t i = 0; i < m.size(); ++i) {
    if (o.Best(i) > rep.outlier_threshold) EXPECT_EQ(rep.labeling.labels[i], kOutlier);
  }
}

TEST(InitialPatches, RandomMatchesAreAllOutliers) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480);
  Matches m;
  for (int i = 0; i < 80; ++i) {
    Correspondence c;
    c.id = i;
    c.x = {ux(rng), uy(rng)};
    c.x_prime = {ux(rng), uy(rng)};
    m.push_back(c);
  }
  // Hypotheses from a plane unrelated to any of the random matches.
  const testing::PlaneView plane{Eigen::Vector3d(0, 0, 1), 3.0};
  const Matches other = testing::SamplePlaneMatches(plane, SmallMotion(), kK, 50, 0.0, rng);
  SamplingConfig sc;
  sc.m = 40;
  const HypothesisSet hyps = SampleLocalHypotheses(other, sc);
  ClusterConfig cc;
  cc.outlier_threshold = 1e-3;
  const InitialPatchReport rep = InitialPatches(m, hyps.hypotheses, {}, cc);
  EXPECT_EQ(rep.labeling.patch_count, 0);
  for (int l : rep.labeling.labels) EXPECT_EQ(l, kOutlier);
}

TEST(JaccardDistance, Examples) {
  const std::vector<int> ab{0, 1}, bc{1, 2}, cd{2, 3}, empty;
  EXPECT_EQ(JaccardDistance(ab, ab), 0.0);
  EXPECT_EQ(JaccardDistance(ab, cd), 1.0);
  EXPECT_DOUBLE_EQ(JaccardDistance(ab, bc), 2.0 / 3.0);
  EXPECT_EQ(JaccardDistance(empty, empty), 1.0);
}

TEST(JaccardDistance, IsAMetricOnRandomSets) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.3);
  auto random_set = [&] {
    std::vector<int> s;
    for (int i = 0; i < 16; ++i) {
      if (coin(rng)) s.push_back(i);
    }
    if (s.empty()) s.push_back(0);
    return s;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    const auto x = random_set(), y = random_set(), z = random_set();
    EXPECT_EQ(JaccardDistance(x, y) == 0.0, x == y);
    EXPECT_EQ(JaccardDistance(x, y), JaccardDistance(y, x));
    EXPECT_LE(JaccardDistance(x, z), JaccardDistance(x, y) + JaccardDistance(y, z) + 1e-12);
  }
}

TEST(PreferenceSets, MembersRespectEpsilon) {
  std::mt19937_64 rng(12);
  const Matches m = CornerScene(rng, 20, 5, 0.5);
  SamplingConfig sc;
  sc.m = 30;
  const auto hs = SampleLocalHypotheses(m, sc).Homographies();
  const auto prefs = PreferenceSets(m, hs, 1.5);
  for (size_t i = 0; i < m.size(); ++i) {
    for (size_t j = 0; j < hs.size(); ++j) {
      const bool member = std::binary_search(prefs[i].begin(), prefs[i].end(), static_cast<int>(j));
      EXPECT_EQ(member, TransferResidual(hs[j], m[i]) <= 1.5);
    }
  }
}

TEST(JLinkage, OneCleanPlaneGivesOneCluster) {
  std::mt19937_64 rng(13);
  const testing::PlaneView plane{Eigen::Vector3d(0.2, 0.1, 1).normalized(), 2.0};
  const Matches m = testing::SamplePlaneMatches(plane, SmallMotion(), kK, 60, 0.0, rng);
  SamplingConfig sc;
  sc.m = 20;
  const auto r = JLinkageCluster(m, SampleLocalHypotheses(m, sc).Homographies(), 1.0);
  EXPECT_EQ(r.labeling.patch_count, 1);
  EXPECT_EQ(r.labeling.InlierCount(), m.size());
}

TEST(JLinkage, DisjointPreferencesGiveTwoClusters) {
  std::mt19937_64 rng(14);
  const Matches all = CornerScene(rng, 40, 0, 0.0);
  const Matches m(all.begin(), all.begin() + 80);
  // Hypotheses fit to each wall on its own; no match prefers the other wall's.
  const Matches left(m.begin(), m.begin() + 40), right(m.begin() + 40, m.end());
  const std::vector<Homography> hs{EstimateHomography(left), EstimateHomography(left),
                                   EstimateHomography(right)};
  const auto r = JLinkageCluster(m, hs, 1e-3);
  ASSERT_EQ(r.labeling.patch_count, 2);
  for (const auto& members : r.labeling.Members()) EXPECT_EQ(Purity(members, m), 1.0);
}

TEST(JLinkage, CornerSceneClustersArePure) {
  std::mt19937_64 rng(15);
  const Matches m = CornerScene(rng, 80, 10, 0.5);
  SamplingConfig sc;
  sc.m = 300;
  sc.seed = 4;
  const auto hs = SampleLocalHypotheses(m, sc).Homographies();
  const auto r = JLinkageCluster(m, hs, 1.5);
  EXPECT_GE(r.labeling.patch_count, 1);
  EXPECT_LE(r.merges, static_cast<int>(m.size()) - 1);
  for (const auto& members : r.labeling.Members()) EXPECT_GE(Purity(members, m), 0.8);
  for (size_t a = 0; a < r.cluster_preferences.size(); ++a) {
    for (size_t b = a + 1; b < r.cluster_preferences.size(); ++b) {
      EXPECT_EQ(JaccardDistance(r.cluster_preferences[a], r.cluster_preferences[b]), 1.0);
    }
  }
}

std::vector<int> Range(int lo, int hi) {
  std::vector<int> v(static_cast<size_t>(hi - lo));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

TEST(FouheyDistance, Cases) {
  std::mt19937_64 rng(16);
  const Matches clean = CornerScene(rng, 40, 0, 0.0);
  EXPECT_LT(FouheyDistance(Range(0, 20), Range(20, 40), clean), 1e-6);

  // Left and right walls are perpendicular; their union cannot be fit to the
  // 0.5 px noise level.
  const Matches noisy = CornerScene(rng, 40, 0, 0.5);
  const double same = FouheyDistance(Range(0, 20), Range(20, 40), noisy);
  const double cross = FouheyDistance(Range(0, 20), Range(40, 60), noisy);
  EXPECT_GT(cross, 3.0 * 0.5);
  EXPECT_GT(cross, 3.0 * same);

  const std::vector<int> x = Range(0, 30);
  const Homography h = EstimateHomography(noisy, x);
  double self = 0;
  for (int i : x) self += TransferResidual(h, noisy[static_cast<size_t>(i)]);
  EXPECT_NEAR(FouheyDistance(x, x, noisy), self / 30, 1e-12);
  EXPECT_THROW(FouheyDistance(Range(0, 2), Range(1, 3), noisy), Error);
}

// Twelve patches of uneven size, four per plane.
PatchLabeling TwelvePatches(const Matches& m) {
  std::vector<int> labels(m.size(), kOutlier);
  const int cuts[] = {0, 9, 21, 36, 60};
  for (int plane = 0; plane < 3; ++plane) {
    for (int p = 0; p < 4; ++p) {
      for (int i = cuts[p]; i < cuts[p + 1]; ++i) labels[static_cast<size_t>(plane * 60 + i)] = plane * 4 + p;
    }
  }
  return CompactLabels(labels);
}

// Exhaustive oracle: every step scores all pairs from scratch with an
// independent residual computation and replays the greedy decision.
std::vector<std::pair<int, int>> MergeOracle(const PatchLabeling& patches, const Matches& m,
                                             double threshold) {
  std::vector<std::vector<int>> groups = patches.Members();
  std::vector<std::pair<int, int>> merges;
  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<size_t, size_t> pick;
    for (size_t a = 0; a < groups.size(); ++a) {
      for (size_t b = 0; b < groups.size(); ++b) {
        if (a >= b) continue;
        std::vector<int> u = groups[a];
        u.insert(u.end(), groups[b].begin(), groups[b].end());
        std::sort(u.begin(), u.end());
        const Eigen::Matrix3d h = EstimateHomography(m, u).matrix();
        double cost = 0;
        for (int i : u) {
          const auto& c = m[static_cast<size_t>(i)];
          cost += (c.x_prime - testing::ApplyHomographyOracle(h, c.x.x(), c.x.y())).norm();
        }
        if (cost < best) {
          best = cost;
          pick = {a, b};
        }
      }
    }
    if (!(best < threshold)) break;
    merges.emplace_back(groups[pick.first].front(), groups[pick.second].front());
    groups[pick.first].insert(groups[pick.first].end(), groups[pick.second].begin(),
                              groups[pick.second].end());
    std::sort(groups[pick.first].begin(), groups[pick.first].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(pick.second));
  }
  return merges;
}

TEST(ResidueMergeBaseline, OnePlaneCollapses) {
  std::mt19937_64 rng(17);
  const Matches all = CornerScene(rng, 60, 0, 0.0);
  const Matches m(all.begin(), all.begin() + 60);
  std::vector<int> labels(60);
  for (int i = 0; i < 60; ++i) labels[static_cast<size_t>(i)] = i / 15;
  const MergeResult r = ResidueMergeBaseline(CompactLabels(labels), m, 1e-3);
  EXPECT_EQ(r.labeling.patch_count, 1);
}

TEST(ResidueMergeBaseline, StrictThresholdKeepsOrthogonalPlanes) {
  std::mt19937_64 rng(18);
  const Matches m = CornerScene(rng, 30, 0, 0.5);
  std::vector<int> labels(m.size());
  for (size_t i = 0; i < m.size(); ++i) labels[i] = *m[i].gt_plane;
  const PatchLabeling in = CompactLabels(labels);
  const MergeResult r = ResidueMergeBaseline(in, m, 1.0);
  EXPECT_TRUE(r.merges.empty());
  EXPECT_EQ(r.labeling.labels, in.labels);
}

TEST(ResidueMergeBaseline, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(19);
  const Matches m = CornerScene(rng, 60, 0, 0.7);
  const PatchLabeling patches = TwelvePatches(m);
  for (double threshold : {20.0, 60.0, 120.0, 1e9}) {
    const MergeResult r = ResidueMergeBaseline(patches, m, threshold);
    EXPECT_EQ(r.merges, MergeOracle(patches, m, threshold)) << "threshold " << threshold;
  }
}

TEST(SecondMinResidueTable, IdenticalPatches) {
  std::mt19937_64 rng(20);
  const Matches m = CornerScene(rng, 20, 0, 0.3);
  std::vector<int> labels(m.size(), kOutlier);
  for (int i = 0; i < 20; ++i) labels[static_cast<size_t>(i)] = i % 2;
  const ResidueTable t = SecondMinResidueTable(CompactLabels(labels), m);
  ASSERT_EQ(t.residual.rows(), 2);
  for (int c = 0; c < 2; ++c) {
    EXPECT_NE(t.first_min[static_cast<size_t>(c)], t.second_min[static_cast<size_t>(c)]);
  }
}

TEST(SecondMinResidueTable, CleanManualPatchesStayWithinPlanes) {
  std::mt19937_64 rng(21);
  const Matches m = CornerScene(rng, 60, 0, 0.0);
  const PatchLabeling patches = TwelvePatches(m);
  const ResidueTable t = SecondMinResidueTable(patches, m);
  ASSERT_EQ(t.residual.rows(), 12);
  for (size_t c = 0; c < 12; ++c) {
    EXPECT_EQ(t.first_min[c] / 4, static_cast<int>(c) / 4);
    EXPECT_EQ(t.second_min[c] / 4, static_cast<int>(c) / 4);
  }
  // Independent recomputation of one cell.
  const auto members = patches.Members();
  const Eigen::Matrix3d h = EstimateHomography(m, members[5]).matrix();
  double sum = 0;
  for (int i : members[2]) {
    const auto& c = m[static_cast<size_t>(i)];
    sum += (c.x_prime - testing::ApplyHomographyOracle(h, c.x.x(), c.x.y())).norm();
  }
  EXPECT_NEAR(t.residual(5, 2), sum / members[2].size(), 1e-9 * (1 + sum));
}

TEST(SecondMinResidueTable, SinglePatchIsAnError) {
  std::mt19937_64 rng(22);
  const Matches m = CornerScene(rng, 10, 0, 0.0);
  std::vector<int> labels(m.size(), 0);
  EXPECT_THROW(SecondMinResidueTable(CompactLabels(labels), m), Error);
}

}  // namespace
}  // namespace planemerge
