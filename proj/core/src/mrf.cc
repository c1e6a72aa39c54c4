#include "planemerge/mrf.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "planemerge/error.h"
#include "planemerge/parallel.h"

namespace planemerge {
namespace {

constexpr double kMinResidualScale = 1e-3;  // pixels

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace

void ValidateEnergyWeights(const EnergyWeights& w) {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, std::string("mrf.") + name + " must be >= 0");
    }
  };
  check(w.lambda1, "lambda1");
  check(w.lambda2, "lambda2");
  check(w.lambda3, "lambda3");
}

void ValidateTextureConfig(const TextureConfig& cfg) {
  if (cfg.window < 1 || cfg.window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "texture.window must be odd and >= 1");
  }
}

void ValidateProblem(const MrfProblem& p) {
  const Eigen::Index n = static_cast<Eigen::Index>(p.nodes.size());
  if (p.label_count < 1) throw Error(ErrorCode::kInvalidProblem, "problem has no labels");
  if (p.unary.rows() != n || p.unary.cols() != p.label_count) {
    throw Error(ErrorCode::kInvalidProblem, "unary table has the wrong shape");
  }
  if (!p.unary.allFinite()) throw Error(ErrorCode::kInvalidProblem, "non-finite unary energy");
  if (p.pairwise.size() != p.edges.size()) {
    throw Error(ErrorCode::kInvalidProblem, "one pairwise table per edge required");
  }
  for (size_t e = 0; e < p.edges.size(); ++e) {
    const auto [a, b] = p.edges[e];
    if (a < 0 || b >= n || a >= b) {
      throw Error(ErrorCode::kInvalidProblem, "edge " + std::to_string(e) + " is malformed");
    }
    if (p.pairwise[e].rows() != p.label_count || p.pairwise[e].cols() != p.label_count) {
      throw Error(ErrorCode::kInvalidProblem, "pairwise table has the wrong shape");
    }
    if (!p.pairwise[e].allFinite()) {
      throw Error(ErrorCode::kInvalidProblem, "non-finite pairwise energy");
    }
  }
  if (!p.initial.empty() && p.initial.size() != p.nodes.size()) {
    throw Error(ErrorCode::kInvalidProblem, "initial labeling has the wrong length");
  }
}

double TotalEnergy(const MrfProblem& p, std::span<const int> labeling) {
  if (labeling.size() != p.nodes.size()) {
    throw Error(ErrorCode::kInvalidArgument, "labeling length differs from node count");
  }
  double e = 0.0;
  for (size_t i = 0; i < labeling.size(); ++i) {
    if (labeling[i] < 0 || labeling[i] >= p.label_count) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  "node " + std::to_string(i) + " has label " + std::to_string(labeling[i]));
    }
    e += p.unary(static_cast<Eigen::Index>(i), labeling[i]);
  }
  for (size_t k = 0; k < p.edges.size(); ++k) {
    const auto [a, b] = p.edges[k];
    e += p.pairwise[k](labeling[static_cast<size_t>(a)], labeling[static_cast<size_t>(b)]);
  }
  return e;
}

double UnaryResidual(std::span<const int> neighborhood, const Homography& h,
                     std::span<const Correspondence> matches) {
  double sum = 0.0;
  for (int i : neighborhood) {
    const double r = TransferResidualOrInf(h, matches[static_cast<size_t>(i)]);
    // A point mapped to infinity is as far from the plane as it gets; keep the
    // energy finite.
    sum += std::isfinite(r) ? r : 1e9;
  }
  return sum;
}

double NormalTerm(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double denom = a.norm() * b.norm();
  const double c = denom > 0.0 ? std::clamp(a.dot(b) / denom, -1.0, 1.0) : 0.0;
  return (1.0 - c) * (1.0 - c);
}

double UnaryNormal(const std::optional<Eigen::Vector3d>& local, const PlanarPatch& patch) {
  if (!local || !patch.valid || !patch.plane) return 1.0;
  return NormalTerm(*local, patch.plane->normal);
}

double PairwiseEnergy(int label_p, int label_q, const PairwiseInputs& in, const EnergyWeights& w,
                      PairwiseMode mode) {
  const bool differ = label_p != label_q;
  if (mode != PairwiseMode::kLiteral && !differ) return 0.0;
  const double normal =
      in.normal_p && in.normal_q ? NormalTerm(*in.normal_p, *in.normal_q) : 1.0;
  double texture = 0.0;
  if (w.lambda3 > 0.0) {
    if (!in.color_p || !in.color_q) {
      throw Error(ErrorCode::kMissingTexture, "texture weight set but colour means are missing");
    }
    texture = (*in.color_p - *in.color_q).norm();
  }
  const double potts = differ ? w.lambda1 : 0.0;
  switch (mode) {
    case PairwiseMode::kContrastSensitive:
      return potts + w.lambda2 * std::exp(-normal) +
             (w.lambda3 > 0.0 ? w.lambda3 * std::exp(-texture) : 0.0);
    case PairwiseMode::kGated:
    case PairwiseMode::kLiteral:
      break;
  }
  return potts + w.lambda2 * normal + w.lambda3 * texture;
}

MrfProblem BuildMrf(std::span<const Correspondence> matches, const PatchLabeling& refined,
                    const MatchGraph& graph, std::span<const LocalNormal> local_normals,
                    std::span<const PlanarPatch> patches, const MrfConfig& cfg) {
  ValidateEnergyWeights(cfg.weights);
  ValidateTextureConfig(cfg.texture);
  if (refined.labels.size() != matches.size() || local_normals.size() != matches.size() ||
      graph.node_count != matches.size()) {
    throw Error(ErrorCode::kInvalidArgument, "matches, labeling, graph and normals differ in size");
  }
  if (patches.size() != static_cast<size_t>(refined.patch_count)) {
    throw Error(ErrorCode::kInvalidArgument, "one plane model per refined patch required");
  }

  MrfProblem p;
  std::vector<int> label_of_patch(patches.size(), -1);
  for (size_t k = 0; k < patches.size(); ++k) {
    if (!patches[k].valid) continue;
    label_of_patch[k] = static_cast<int>(p.label_patch.size());
    p.label_patch.push_back(static_cast<int>(k));
  }
  p.label_count = static_cast<int>(p.label_patch.size());
  if (p.label_count == 0) throw Error(ErrorCode::kNoValidPatches, "no valid refined patch");

  std::vector<int> node_of(matches.size(), -1);
  for (size_t i = 0; i < matches.size(); ++i) {
    if (refined.labels[i] == kOutlier) continue;
    node_of[i] = static_cast<int>(p.nodes.size());
    p.nodes.push_back(static_cast<int>(i));
  }
  const Eigen::Index n = static_cast<Eigen::Index>(p.nodes.size());
  const int labels = p.label_count;

  Eigen::MatrixXd residual(n, labels);
  ParallelFor(p.nodes.size(), [&](size_t v) {
    const int i = p.nodes[v];
    std::span<const int> hood = local_normals[static_cast<size_t>(i)].neighborhood;
    const int self[] = {i};
    if (hood.empty()) hood = self;
    for (int l = 0; l < labels; ++l) {
      residual(static_cast<Eigen::Index>(v), l) =
          UnaryResidual(hood, patches[static_cast<size_t>(p.label_patch[static_cast<size_t>(l)])].h,
                        matches);
    }
  });
  std::vector<double> own;
  for (Eigen::Index v = 0; v < n; ++v) {
    const int l = label_of_patch[static_cast<size_t>(refined.labels[static_cast<size_t>(p.nodes[static_cast<size_t>(v)])])];
    if (l >= 0) own.push_back(residual(v, l));
  }
  p.residual_scale = std::max(kMinResidualScale, 1.4826 * Median(std::move(own)));

  p.unary.resize(n, labels);
  for (Eigen::Index v = 0; v < n; ++v) {
    const auto& normal = local_normals[static_cast<size_t>(p.nodes[static_cast<size_t>(v)])].normal;
    for (int l = 0; l < labels; ++l) {
      p.unary(v, l) = residual(v, l) / p.residual_scale +
                      UnaryNormal(normal, patches[static_cast<size_t>(p.label_patch[static_cast<size_t>(l)])]);
    }
  }

  p.initial.resize(p.nodes.size());
  for (Eigen::Index v = 0; v < n; ++v) {
    const int l = label_of_patch[static_cast<size_t>(refined.labels[static_cast<size_t>(p.nodes[static_cast<size_t>(v)])])];
    if (l >= 0) {
      p.initial[static_cast<size_t>(v)] = l;
    } else {
      Eigen::Index best = 0;
      p.unary.row(v).minCoeff(&best);
      p.initial[static_cast<size_t>(v)] = static_cast<int>(best);
    }
  }

  for (const auto& [a, b] : graph.edges) {
    const int na = node_of[static_cast<size_t>(a)];
    const int nb = node_of[static_cast<size_t>(b)];
    if (na < 0 || nb < 0) continue;
    p.edges.emplace_back(std::min(na, nb), std::max(na, nb));
  }
  std::sort(p.edges.begin(), p.edges.end());
  std::vector<char> touched(p.nodes.size(), 0);
  for (const auto& [a, b] : p.edges) touched[static_cast<size_t>(a)] = touched[static_cast<size_t>(b)] = 1;
  for (size_t v = 0; v < touched.size(); ++v) {
    if (!touched[v]) p.isolated.push_back(static_cast<int>(v));
  }
  p.pairwise.resize(p.edges.size());
  for (size_t e = 0; e < p.edges.size(); ++e) {
    const size_t ma = static_cast<size_t>(p.nodes[static_cast<size_t>(p.edges[e].first)]);
    const size_t mb = static_cast<size_t>(p.nodes[static_cast<size_t>(p.edges[e].second)]);
    PairwiseInputs in{local_normals[ma].normal, local_normals[mb].normal, matches[ma].color_mean,
                      matches[mb].color_mean};
    Eigen::MatrixXd& table = p.pairwise[e];
    table.resize(labels, labels);
    for (int x = 0; x < labels; ++x) {
      for (int y = 0; y < labels; ++y) table(x, y) = PairwiseEnergy(x, y, in, cfg.weights, cfg.mode);
    }
  }
  ValidateProblem(p);
  return p;
}

PatchLabeling LabelingFromSolution(const MrfProblem& problem, std::span<const int> solution,
                                   size_t match_count) {
  std::vector<int> labels(match_count, kOutlier);
  for (size_t v = 0; v < problem.nodes.size(); ++v) {
    labels[static_cast<size_t>(problem.nodes[v])] =
        problem.label_patch[static_cast<size_t>(solution[v])];
  }
  return CompactLabels(labels);
}

}  // namespace planemerge
