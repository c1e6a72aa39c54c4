#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "planemerge/geometry.h"
#include "planemerge/refinement.h"
#include "planemerge/types.h"

namespace planemerge {

struct EnergyWeights {
  double lambda1 = 1.0;  // Potts
  double lambda2 = 1.0;  // neighbouring normals
  double lambda3 = 1.0;  // texture
};

void ValidateEnergyWeights(const EnergyWeights& w);

enum class PairwiseMode {
  // Disagreement costs lambda1 + lambda2 * normal + lambda3 * texture.
  kGated,
  // Disagreement costs lambda1 + lambda2 * exp(-normal) + lambda3 * exp(-texture),
  // so cuts are cheap where neighbours differ.
  kContrastSensitive,
  // lambda1 * [lp != lq] + lambda2 * normal + lambda3 * texture on every edge.
  kLiteral,
};

struct TextureConfig {
  int window = 5;  // side of the square window the colour means were taken over
};

void ValidateTextureConfig(const TextureConfig& cfg);

struct MrfConfig {
  EnergyWeights weights;
  PairwiseMode mode = PairwiseMode::kContrastSensitive;
  TextureConfig texture;
};

// Dense discrete pairwise energy. Edges join node positions (a < b); the
// table of edge e is indexed pairwise[e](label_a, label_b).
struct MrfProblem {
  int label_count = 0;
  std::vector<int> nodes;   // match index of each node
  Eigen::MatrixXd unary;    // nodes x labels
  std::vector<std::pair<int, int>> edges;
  std::vector<Eigen::MatrixXd> pairwise;
  std::vector<int> initial;      // starting labeling
  std::vector<int> label_patch;  // refined patch id behind each label
  std::vector<int> isolated;     // nodes without edges
  double residual_scale = 1.0;   // sigma_r the residual unaries were divided by

  size_t node_count() const { return nodes.size(); }
};

// Throws InvalidProblem on shape mismatches, bad edges or non-finite energies.
void ValidateProblem(const MrfProblem& problem);

// Throws LabelOutOfRange (or InvalidArgument on a length mismatch).
double TotalEnergy(const MrfProblem& problem, std::span<const int> labeling);

// Sum of |x' - H x| over the local patch, in pixels.
double UnaryResidual(std::span<const int> neighborhood, const Homography& h,
                     std::span<const Correspondence> matches);

// (1 - cos(a, b))^2 in [0, 4].
double NormalTerm(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// Normal agreement with the patch; 1 when either normal is unavailable.
double UnaryNormal(const std::optional<Eigen::Vector3d>& local, const PlanarPatch& patch);

struct PairwiseInputs {
  std::optional<Eigen::Vector3d> normal_p, normal_q;  // unreliable normals contribute 1
  std::optional<Eigen::Vector3d> color_p, color_q;
};

// Throws MissingTexture when lambda3 > 0 and either colour is absent.
double PairwiseEnergy(int label_p, int label_q, const PairwiseInputs& in, const EnergyWeights& w,
                      PairwiseMode mode);

// Nodes are the non-outlier matches of `refined`; labels are its valid
// patches (patches[p] describes refined patch p). Edges are graph edges
// between nodes. Residual unaries are divided by sigma_r = 1.4826 x the
// median own-label residual. Nodes of invalid patches start at their
// cheapest label. Throws NoValidPatches.
MrfProblem BuildMrf(std::span<const Correspondence> matches, const PatchLabeling& refined,
                    const MatchGraph& graph, std::span<const LocalNormal> local_normals,
                    std::span<const PlanarPatch> patches, const MrfConfig& cfg);

// Per-match labeling (refined patch ids, kOutlier elsewhere) for a solution.
PatchLabeling LabelingFromSolution(const MrfProblem& problem, std::span<const int> solution,
                                   size_t match_count);

}  // namespace planemerge
