// Mean classification error over ten corner scenes should not improve as the
// image noise grows from 0 to 1 to 2 pixels.

#include <cstdio>
#include <vector>

#include "planemerge/bench.h"
#include "planemerge/pipeline.h"

int main() {
  using namespace planemerge;
  std::vector<double> means;
  for (const double sigma : {0.0, 1.0, 2.0}) {
    double sum = 0.0;
    for (int seed = 1; seed <= 10; ++seed) {
      SceneSpec spec = Preset("corner", static_cast<uint64_t>(seed));
      spec.noise_sigma = sigma;
      PipelineConfig cfg;
      cfg.seed = static_cast<uint64_t>(seed);
      sum += RunPipeline(GenerateScene(spec).matches, spec.intrinsics, cfg).eval->error_percent;
    }
    means.push_back(sum / 10.0);
    std::printf("sigma %.0f px: mean error %.2f%%\n", sigma, means.back());
  }
  const bool pass = means[0] <= means[1] && means[1] <= means[2];
  std::printf("[%s] noise_monotonicity: %.2f%% <= %.2f%% <= %.2f%%\n", pass ? "PASS" : "FAIL", means[0],
              means[1], means[2]);
  return pass ? 0 : 1;
}
