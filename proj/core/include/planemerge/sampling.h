#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "planemerge/geometry.h"
#include "planemerge/types.h"

namespace planemerge {

struct SamplingConfig {
  int m = 500;                 // hypotheses to generate
  int neighborhood_k = 30;     // candidate pool around each seed match
  int minimal_sample = 4;
  uint64_t seed = 0;
  double sigma_spatial = 50.0;  // pixels
  int max_retries = 10;         // redraws per hypothesis after a degenerate sample
};

void ValidateSamplingConfig(const SamplingConfig& cfg);

struct Hypothesis {
  Homography h;
  std::vector<int64_t> source_ids;  // ids of the sampled matches, seed first
};

struct HypothesisSet {
  std::vector<Hypothesis> hypotheses;
  int requested = 0;
  int shortfall = 0;     // hypotheses that never produced a valid sample
  int failed_draws = 0;  // degenerate samples, including retried ones
  int total_draws = 0;

  std::vector<Homography> Homographies() const;
};

// Draws one seed match uniformly, then the rest of the minimal sample from its
// nearest neighbours with probability proportional to exp(-d^2 / sigma^2) of
// the image-1 distance d. Each hypothesis has its own RNG stream derived from
// (seed, index), so the output does not depend on scheduling.
//
// Throws InsufficientMatches with fewer than minimal_sample matches and
// ExcessiveDegeneracy when more than half of all draws were degenerate.
HypothesisSet SampleLocalHypotheses(std::span<const Correspondence> matches,
                                    const SamplingConfig& cfg);

// Rejects minimal samples containing a nearly collinear triple.
bool IsDegenerateSample(std::span<const Correspondence> matches, std::span<const int> sample);

}  // namespace planemerge
