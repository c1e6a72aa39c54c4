#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planemerge/bench.h"
#include "planemerge/geometry.h"
#include "planemerge/mrf.h"
#include "planemerge/multistructure.h"
#include "planemerge/refinement.h"
#include "planemerge/sampling.h"
#include "planemerge/solver.h"
#include "planemerge/types.h"

namespace planemerge {

struct PipelineConfig {
  uint64_t seed = 0;  // overrides the sampling and clustering seeds
  SamplingConfig sampling;
  OrkConfig ork;
  // Over-segment initially; the MRF rounds merge the pieces again.
  ClusterConfig cluster{.oversegmentation = 3.0};
  double cut_factor = 3.0;  // cut threshold in median Delaunay edge lengths
  size_t min_patch_size = 10;
  LocalPatchConfig local_patch;
  MrfConfig mrf;
  SolverConfig solver;
  bool use_mrf = true;
  // Relabel, refit the plane models on the new labels and relabel again,
  // until the labeling stops changing or this many rounds ran.
  int mrf_rounds = 5;
  // Share one camera motion, voted from the patch decompositions, across all
  // plane and normal estimates.
  bool motion_consensus = true;
};

void ValidatePipelineConfig(const PipelineConfig& cfg);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  PatchLabeling final_labeling;
  PatchLabeling initial_patches;
  PatchLabeling refined_patches;
  std::vector<PlanarPatch> plane_models;  // one per refined patch
  std::vector<LocalNormal> local_normals;
  std::optional<Motion> motion;           // consensus motion, if any

  std::vector<Hypothesis> sampled;
  int hypotheses = 0;
  double outlier_threshold = 0.0;
  int clusters_requested = 0;
  double cut_threshold = 0.0;
  int valid_patches = 0;

  // MRF stage; figures describe the first round, empty when skipped.
  int mrf_nodes = 0;
  int mrf_edges = 0;
  int mrf_labels = 0;
  double initial_energy = 0.0;
  std::optional<SolveReport> solve;  // last round
  int mrf_rounds_run = 0;

  std::vector<StageTiming> timings;
  std::optional<EvalReport> eval;  // when every match carries a ground-truth label
};

// sampling -> initial patches -> distance cut -> plane models and local
// normals -> MRF relabeling -> drop patches below min_patch_size.
// Stage errors are rethrown with the stage name prepended to the message.
// Throws InsufficientMatches below 20 matches.
PipelineResult RunPipeline(std::span<const Correspondence> matches, const Intrinsics& intrinsics,
                           const PipelineConfig& cfg);

// Most supported motion among the decomposition candidates of the given
// patches, weighted by member count; empty without a valid candidate.
std::optional<Motion> ConsensusMotion(std::span<const Correspondence> matches,
                                      const PatchLabeling& patches, const Intrinsics& intrinsics,
                                      size_t min_members);

}  // namespace planemerge
