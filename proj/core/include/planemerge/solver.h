#pragma once

#include <vector>

#include "planemerge/mrf.h"

namespace planemerge {

struct SolverConfig {
  int max_iters = 100;
  double tol = 1e-6;  // relative lower-bound improvement that counts as converged
};

struct SolveReport {
  std::vector<int> labeling;         // lowest-energy labeling seen
  double energy = 0.0;
  std::vector<double> lower_bounds;  // one per iteration, nondecreasing
  int iterations = 0;
  bool converged = false;
};

// Sequential tree-reweighted message passing with node order = node id.
// The bound is the sum of exact minima over a decomposition into monotonic
// chains. The initial labeling (if any) competes with the decoded ones.
SolveReport TrwsSolve(const MrfProblem& problem, const SolverConfig& cfg = {});

// Exhaustive minimum; ties go to the lexicographically smallest labeling.
// Throws TooLarge when label_count^nodes exceeds 1e7.
std::vector<int> BruteForceMap(const MrfProblem& problem);

}  // namespace planemerge
