#include "planemerge/pipeline.h"

#include <chrono>
#include <cmath>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>

#include "planemerge/error.h"

namespace planemerge {
namespace {

constexpr double kSameMotion = 0.15;  // radians, rotation plus translation-direction angle

template <typename Fn>
void Stage(const char* name, std::vector<StageTiming>& timings, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const Error& e) {
    const std::string_view prefix = ErrorCodeName(e.code());
    std::string_view msg = e.what();
    if (msg.starts_with(prefix) && msg.substr(prefix.size()).starts_with(": ")) {
      msg.remove_prefix(prefix.size() + 2);
    }
    throw Error(e.code(), std::string(name) + ": " + std::string(msg));
  }
  const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
  timings.push_back({name, took.count()});
}

}  // namespace

void ValidatePipelineConfig(const PipelineConfig& cfg) {
  ValidateSamplingConfig(cfg.sampling);
  ValidateLocalPatchConfig(cfg.local_patch);
  ValidateEnergyWeights(cfg.mrf.weights);
  ValidateTextureConfig(cfg.mrf.texture);
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (cfg.ork.step < 0) fail("ork.step must be >= 0");
  for (double z : cfg.ork.z) {
    if (!(z >= 0.0) || !std::isfinite(z)) fail("ork.z entries must be finite and >= 0");
  }
  if (cfg.cluster.max_planes < 1) fail("cluster.max_planes must be >= 1");
  if (!(cfg.cluster.oversegmentation >= 1.0) || !std::isfinite(cfg.cluster.oversegmentation)) {
    fail("cluster.oversegmentation must be >= 1");
  }
  if (cfg.cluster.kmeans_restarts < 1) fail("cluster.kmeans_restarts must be >= 1");
  if (!std::isfinite(cfg.cluster.outlier_threshold)) fail("cluster.outlier_threshold must be finite");
  if (!(cfg.cut_factor > 0.0)) fail("cut_factor must be > 0");
  if (cfg.mrf_rounds < 1) fail("mrf_rounds must be >= 1");
  if (cfg.solver.max_iters < 1) fail("solver.max_iters must be >= 1");
  if (!(cfg.solver.tol >= 0.0)) fail("solver.tol must be >= 0");
}

std::optional<Motion> ConsensusMotion(std::span<const Correspondence> matches,
                                      const PatchLabeling& patches, const Intrinsics& intrinsics,
                                      size_t min_members) {
  struct Vote {
    Motion motion;
    size_t patch;
  };
  std::vector<Vote> votes;
  const auto members = patches.Members();
  std::vector<double> weight(members.size(), 0.0);
  for (size_t p = 0; p < members.size(); ++p) {
    if (members[p].size() < std::max<size_t>(min_members, 4)) continue;
    std::vector<Correspondence> support;
    for (int i : members[p]) support.push_back(matches[static_cast<size_t>(i)]);
    try {
      const Homography h = EstimateHomography(support);
      DecomposeOptions opt;
      opt.support = support;
      opt.min_visible_fraction = 0.9;
      for (const auto& c : DecomposeHomography(h, intrinsics, opt)) votes.push_back({c.motion(), p});
    } catch (const Error&) {
      continue;
    }
    weight[p] = static_cast<double>(members[p].size());
  }
  if (votes.empty()) return std::nullopt;

  size_t best = 0;
  double best_score = -1.0;
  for (size_t v = 0; v < votes.size(); ++v) {
    std::vector<char> agrees(members.size(), 0);
    for (const auto& other : votes) {
      if (MotionDistance(votes[v].motion, other.motion) < kSameMotion) agrees[other.patch] = 1;
    }
    double score = 0.0;
    for (size_t p = 0; p < agrees.size(); ++p) score += agrees[p] ? weight[p] : 0.0;
    if (score > best_score) {
      best_score = score;
      best = v;
    }
  }
  return votes[best].motion;
}

PipelineResult RunPipeline(std::span<const Correspondence> matches, const Intrinsics& intrinsics,
                           const PipelineConfig& cfg) {
  ValidatePipelineConfig(cfg);
  ValidateIntrinsics(intrinsics);
  if (matches.size() < 20) {
    throw Error(ErrorCode::kInsufficientMatches, "the pipeline needs at least 20 matches");
  }
  for (const auto& c : matches) ValidateCorrespondence(c);

  PipelineResult r;
  HypothesisSet hyps;
  Stage("sampling", r.timings, [&] {
    SamplingConfig sc = cfg.sampling;
    sc.seed = cfg.seed;
    hyps = SampleLocalHypotheses(matches, sc);
    r.hypotheses = static_cast<int>(hyps.hypotheses.size());
    r.sampled = hyps.hypotheses;
  });

  Stage("initial_patches", r.timings, [&] {
    ClusterConfig cc = cfg.cluster;
    cc.seed = cfg.seed;
    InitialPatchReport rep = InitialPatches(matches, hyps.hypotheses, cfg.ork, cc);
    r.initial_patches = std::move(rep.labeling);
    r.outlier_threshold = rep.outlier_threshold;
    r.clusters_requested = rep.clusters_requested;
  });

  MatchGraph graph;
  Stage("refinement", r.timings, [&] {
    graph = DelaunayTriangulate(matches);
    r.cut_threshold = cfg.cut_factor * MedianEdgeLength(graph);
    r.refined_patches =
        CutMeshByDistance(graph, r.initial_patches, r.cut_threshold, cfg.min_patch_size);
  });

  auto fit_models = [&](const PatchLabeling& labeling) {
    PlaneModelOptions opt;
    opt.min_members = cfg.min_patch_size;
    opt.motion_prior = r.motion;
    std::vector<PlanarPatch> models;
    const auto members = labeling.Members();
    for (size_t p = 0; p < members.size(); ++p) {
      try {
        models.push_back(PatchPlaneModel(static_cast<int>(p), members[p], matches, intrinsics, opt));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
        PlanarPatch invalid;
        invalid.id = static_cast<int>(p);
        invalid.members = members[p];
        models.push_back(std::move(invalid));
      }
    }
    return std::make_pair(
        std::move(models),
        ComputeLocalNormals(labeling, matches, cfg.local_patch, intrinsics, r.motion));
  };

  Stage("plane_models", r.timings, [&] {
    if (cfg.motion_consensus) {
      r.motion = ConsensusMotion(matches, r.refined_patches, intrinsics, cfg.min_patch_size);
    }
    std::tie(r.plane_models, r.local_normals) = fit_models(r.refined_patches);
    for (const auto& m : r.plane_models) r.valid_patches += m.valid ? 1 : 0;
  });

  if (cfg.use_mrf) {
    Stage("mrf", r.timings, [&] {
      PatchLabeling current = r.refined_patches;
      std::vector<PlanarPatch> models = r.plane_models;
      std::vector<LocalNormal> normals = r.local_normals;
      for (int round = 0; round < cfg.mrf_rounds; ++round) {
        if (round > 0) std::tie(models, normals) = fit_models(current);
        const MrfProblem problem = BuildMrf(matches, current, graph, normals, models, cfg.mrf);
        const SolveReport solve = TrwsSolve(problem, cfg.solver);
        if (round == 0) {
          r.mrf_nodes = static_cast<int>(problem.nodes.size());
          r.mrf_edges = static_cast<int>(problem.edges.size());
          r.mrf_labels = problem.label_count;
          r.initial_energy = TotalEnergy(problem, problem.initial);
        }
        r.solve = solve;
        r.mrf_rounds_run = round + 1;
        PatchLabeling next = DropSmallPatches(
            LabelingFromSolution(problem, solve.labeling, matches.size()), cfg.min_patch_size);
        const bool settled = next.labels == current.labels;
        current = std::move(next);
        if (settled) break;
      }
      r.final_labeling = std::move(current);
    });
  } else {
    r.final_labeling = r.refined_patches;
  }

  bool has_truth = true;
  for (const auto& c : matches) has_truth = has_truth && c.gt_plane.has_value();
  if (has_truth) r.eval = Evaluate(r.final_labeling.labels, TruthLabels(matches));
  return r;
}

}  // namespace planemerge
