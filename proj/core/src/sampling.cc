#include "planemerge/sampling.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <string>

#include "planemerge/error.h"
#include "planemerge/parallel.h"

namespace planemerge {
namespace {

// Twice the triangle area over the squared longest side; zero for collinear.
constexpr double kCollinearity = 1e-3;

uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Draw {
  std::optional<Hypothesis> hypothesis;
  int failed = 0;
  int total = 0;
};

std::vector<int> NearestNeighbors(std::span<const Correspondence> matches, int seed, int k,
                                  std::vector<double>* sq_dist) {
  std::vector<std::pair<double, int>> all;
  all.reserve(matches.size());
  const Eigen::Vector2d& p = matches[static_cast<size_t>(seed)].x;
  for (size_t j = 0; j < matches.size(); ++j) {
    if (static_cast<int>(j) == seed) continue;
    all.emplace_back((matches[j].x - p).squaredNorm(), static_cast<int>(j));
  }
  const size_t take = std::min(all.size(), static_cast<size_t>(k));
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end());
  std::vector<int> out;
  sq_dist->clear();
  for (size_t i = 0; i < take; ++i) {
    out.push_back(all[i].second);
    sq_dist->push_back(all[i].first);
  }
  return out;
}

Draw DrawHypothesis(std::span<const Correspondence> matches, const SamplingConfig& cfg,
                    int index) {
  std::mt19937_64 rng(SplitMix64(cfg.seed ^ SplitMix64(static_cast<uint64_t>(index) + 1)));
  std::uniform_int_distribution<int> pick_seed(0, static_cast<int>(matches.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double inv_sigma2 = 1.0 / (cfg.sigma_spatial * cfg.sigma_spatial);

  Draw draw;
  std::vector<double> sq_dist;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    ++draw.total;
    const int seed = pick_seed(rng);
    const std::vector<int> pool = NearestNeighbors(matches, seed, cfg.neighborhood_k, &sq_dist);
    std::vector<double> weight(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) weight[i] = std::exp(-sq_dist[i] * inv_sigma2);
    if (std::accumulate(weight.begin(), weight.end(), 0.0) <= 0.0) {
      std::fill(weight.begin(), weight.end(), 1.0);
    }

    std::vector<int> sample{seed};
    while (static_cast<int>(sample.size()) < cfg.minimal_sample) {
      const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
      if (total <= 0.0) break;
      double r = unit(rng) * total;
      size_t chosen = 0;
      for (size_t i = 0; i < weight.size(); ++i) {
        if (weight[i] <= 0.0) continue;
        chosen = i;  // last positive entry absorbs rounding at the end
        if (r < weight[i]) break;
        r -= weight[i];
      }
      sample.push_back(pool[chosen]);
      weight[chosen] = 0.0;
    }
    if (static_cast<int>(sample.size()) < cfg.minimal_sample || IsDegenerateSample(matches, sample)) {
      ++draw.failed;
      continue;
    }
    try {
      Hypothesis hyp{EstimateHomography(matches, sample), {}};
      for (int s : sample) hyp.source_ids.push_back(matches[static_cast<size_t>(s)].id);
      draw.hypothesis = std::move(hyp);
      return draw;
    } catch (const Error&) {
      ++draw.failed;
    }
  }
  return draw;
}

}  // namespace

void ValidateSamplingConfig(const SamplingConfig& cfg) {
  if (cfg.m < 1) throw Error(ErrorCode::kInvalidArgument, "sampling.m must be >= 1");
  if (cfg.minimal_sample < 4) {
    throw Error(ErrorCode::kInvalidArgument, "sampling.minimal_sample must be >= 4");
  }
  if (cfg.neighborhood_k < cfg.minimal_sample) {
    throw Error(ErrorCode::kInvalidArgument,
                "sampling.neighborhood_k must be >= sampling.minimal_sample");
  }
  if (!(cfg.sigma_spatial > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling.sigma_spatial must be > 0");
  }
  if (cfg.max_retries < 0) {
    throw Error(ErrorCode::kInvalidArgument, "sampling.max_retries must be >= 0");
  }
}

std::vector<Homography> HypothesisSet::Homographies() const {
  std::vector<Homography> out;
  out.reserve(hypotheses.size());
  for (const Hypothesis& h : hypotheses) out.push_back(h.h);
  return out;
}

bool IsDegenerateSample(std::span<const Correspondence> matches, std::span<const int> sample) {
  const size_t n = sample.size();
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = a + 1; b < n; ++b) {
      for (size_t c = b + 1; c < n; ++c) {
        for (const bool second_view : {false, true}) {
          auto pt = [&](size_t i) -> const Eigen::Vector2d& {
            const Correspondence& m = matches[static_cast<size_t>(sample[i])];
            return second_view ? m.x_prime : m.x;
          };
          const Eigen::Vector2d u = pt(b) - pt(a);
          const Eigen::Vector2d v = pt(c) - pt(a);
          const double longest =
              std::max({u.squaredNorm(), v.squaredNorm(), (pt(c) - pt(b)).squaredNorm()});
          if (longest <= 0.0) return true;
          const double twice_area = std::abs(u.x() * v.y() - u.y() * v.x());
          if (twice_area < kCollinearity * longest) return true;
        }
      }
    }
  }
  return false;
}

HypothesisSet SampleLocalHypotheses(std::span<const Correspondence> matches,
                                    const SamplingConfig& cfg) {
  ValidateSamplingConfig(cfg);
  if (matches.size() < static_cast<size_t>(cfg.minimal_sample)) {
    throw Error(ErrorCode::kInsufficientMatches,
                "need at least " + std::to_string(cfg.minimal_sample) + " matches, got " +
                    std::to_string(matches.size()));
  }

  std::vector<Draw> draws(static_cast<size_t>(cfg.m));
  ParallelFor(draws.size(), [&](size_t i) {
    draws[i] = DrawHypothesis(matches, cfg, static_cast<int>(i));
  });

  HypothesisSet set;
  set.requested = cfg.m;
  for (Draw& d : draws) {
    set.failed_draws += d.failed;
    set.total_draws += d.total;
    if (d.hypothesis) {
      set.hypotheses.push_back(std::move(*d.hypothesis));
    } else {
      ++set.shortfall;
    }
  }
  if (2 * set.failed_draws > set.total_draws) {
    throw Error(ErrorCode::kExcessiveDegeneracy,
                std::to_string(set.failed_draws) + " of " + std::to_string(set.total_draws) +
                    " minimal samples were degenerate");
  }
  return set;
}

}  // namespace planemerge
