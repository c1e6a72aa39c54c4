#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "planemerge/geometry.h"
#include "planemerge/sampling.h"
#include "planemerge/types.h"

namespace planemerge {

// Per-match hypothesis indices sorted by ascending transfer residual. Ties go
// to the lower hypothesis index. Stored row-major, one row of length
// hypothesis_count per match.
class OrderedResidues {
 public:
  OrderedResidues() = default;
  // `residuals` is row-major n x m.
  OrderedResidues(size_t n, size_t m, std::span<const double> residuals);

  size_t size() const { return n_; }
  size_t hypothesis_count() const { return m_; }

  std::span<const int> Order(size_t i) const { return {order_.data() + i * m_, m_}; }
  std::span<const int> Rank(size_t i) const { return {rank_.data() + i * m_, m_}; }
  std::span<const double> Sorted(size_t i) const { return {sorted_.data() + i * m_, m_}; }
  double Best(size_t i) const { return sorted_[i * m_]; }

 private:
  size_t n_ = 0;
  size_t m_ = 0;
  std::vector<int> order_;
  std::vector<int> rank_;
  std::vector<double> sorted_;
};

// Residuals that map to infinity count as +infinity.
OrderedResidues ComputeOrderedResidues(std::span<const Correspondence> matches,
                                       std::span<const Homography> hypotheses);

struct OrkConfig {
  int step = 0;              // h; 0 selects max(1, M / 20)
  std::vector<double> z;     // z_1..z_{M/h}; empty selects z_t = 1 / t
};

// OrkConfig with every default filled in for a given hypothesis count.
// Steps run t = 1..floor(M / h); cut points are alpha_t = t * h.
struct OrkWeights {
  int step = 1;
  int steps = 1;
  std::vector<double> z;
  double big_z = 1.0;

  static OrkWeights Resolve(const OrkConfig& cfg, size_t hypothesis_count);
};

// Difference of intersection kernel between two ordered rows at step t
// (1-based): (|a[0:at) n b[0:at)| - |a[0:at-1) n b[0:at-1)|) / h.
double Doik(std::span<const int> a, std::span<const int> b, int t, const OrkWeights& w);

// Ordered residual kernel: sum_t z_t * DOIK_t / Z. Rows are hypothesis orders.
double OrkKernel(std::span<const int> a, std::span<const int> b, const OrkWeights& w);

// Full n x n kernel over all matches.
Eigen::MatrixXd KernelMatrix(const OrderedResidues& residues, const OrkWeights& w);

// Per match, the smallest residual over hypotheses whose minimal sample did
// not include that match (a sampled match is fit exactly by its own
// hypothesis). +infinity when every hypothesis used it.
std::vector<double> HeldOutBestResiduals(std::span<const Correspondence> matches,
                                         std::span<const Hypothesis> hypotheses,
                                         const OrderedResidues& residues);

// 1.4826 * median of the finite entries.
double RobustNoiseScale(std::span<const double> best);

struct ClusterConfig {
  int max_planes = 12;
  // Best-residual cutoff for outliers; <= 0 selects 3 * RobustNoiseScale.
  double outlier_threshold = 0.0;
  // Second affinity eigenvalue below this means a single structure.
  double single_structure_cutoff = 0.5;
  // Clusters actually requested = estimated count x this factor (capped by
  // max_planes). Values above 1 over-segment on purpose for a later merge.
  double oversegmentation = 1.0;
  uint64_t seed = 0;
  int kmeans_restarts = 8;
};

struct InitialPatchReport {
  PatchLabeling labeling;
  double outlier_threshold = 0.0;
  std::vector<double> best_residual;  // held-out best residual per match
  int clusters_requested = 0;
  std::vector<double> affinity_spectrum;  // leading eigenvalues used for the eigengap
};

// Ordered residues -> ORK kernel -> kernel PCA -> spectral clustering.
// Matches whose held-out best residual exceeds the threshold are outliers.
// Throws EmbeddingFailed if an eigen-solve does not converge.
InitialPatchReport InitialPatches(std::span<const Correspondence> matches,
                                  std::span<const Hypothesis> hypotheses, const OrkConfig& ork,
                                  const ClusterConfig& cluster);

// Number of clusters by the largest gap between consecutive eigenvalues
// (descending order), searched over 1..max_clusters.
int EigengapClusterCount(std::span<const double> descending, int max_clusters);

// (|x u y| - |x n y|) / |x u y| over sorted unique sets; 1 when both are empty.
double JaccardDistance(std::span<const int> x, std::span<const int> y);

// Per-match hypotheses with transfer residual <= epsilon, ascending.
std::vector<std::vector<int>> PreferenceSets(std::span<const Correspondence> matches,
                                             std::span<const Homography> hypotheses,
                                             double epsilon);

struct JLinkageResult {
  PatchLabeling labeling;
  // Every cluster alive when merging stopped, before the size filter.
  std::vector<std::vector<int>> clusters;
  std::vector<std::vector<int>> cluster_preferences;
  int merges = 0;
};

// Agglomerative clustering on preference-set Jaccard distance; a merged
// cluster keeps the intersection of its members' sets. Stops when the closest
// pair is at distance 1. Clusters under min_cluster_size become outliers.
JLinkageResult JLinkageCluster(std::span<const Correspondence> matches,
                               std::span<const Homography> hypotheses, double epsilon,
                               size_t min_cluster_size = 10);

// Mean transfer residual of x u y under a homography refit to the union.
// Throws DegenerateConfiguration when the union cannot be fit.
double FouheyDistance(std::span<const int> x, std::span<const int> y,
                      std::span<const Correspondence> matches);

struct MergeResult {
  PatchLabeling labeling;
  // Merged pairs in order, each side named by its smallest member index.
  std::vector<std::pair<int, int>> merges;
};

// Greedy best-first merging: repeatedly merge the patch pair whose refit
// homography has the lowest summed residual over the union, while that sum is
// below `threshold`.
MergeResult ResidueMergeBaseline(const PatchLabeling& patches,
                                 std::span<const Correspondence> matches, double threshold);

struct ResidueTable {
  // residual(r, c): mean residual of patch r's homography on patch c's matches.
  Eigen::MatrixXd residual;
  std::vector<int> first_min;   // per column: row of the smallest entry
  std::vector<int> second_min;  // per column: row of the second smallest entry
};

// Throws InvalidArgument with fewer than two patches.
ResidueTable SecondMinResidueTable(const PatchLabeling& patches,
                                   std::span<const Correspondence> matches);

}  // namespace planemerge
