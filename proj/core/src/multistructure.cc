#include "planemerge/multistructure.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "planemerge/error.h"
#include "planemerge/parallel.h"

namespace planemerge {
namespace {

constexpr double kMinOutlierThreshold = 1e-3;  // pixels; floor for noiseless data
constexpr int kSelfTuningNeighbor = 7;

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

// Lookup from a rank r (0-based) to the 0-based step whose window contains it;
// ranks past the last full step map to `steps` and are ignored.
std::vector<int> StepOfRank(size_t m, const OrkWeights& w) {
  std::vector<int> step(m);
  for (size_t r = 0; r < m; ++r) {
    step[r] = std::min(w.steps, static_cast<int>(r) / w.step);
  }
  return step;
}

double KernelFromRanks(std::span<const int> ra, std::span<const int> rb,
                       std::span<const int> step_of_rank, const OrkWeights& w,
                       std::vector<int>& counts) {
  counts.assign(static_cast<size_t>(w.steps) + 1, 0);
  for (size_t j = 0; j < ra.size(); ++j) {
    ++counts[static_cast<size_t>(step_of_rank[static_cast<size_t>(std::max(ra[j], rb[j]))])];
  }
  // Each step contributes z_t * (new shared hypotheses / h); for identical
  // rows every ratio is exactly 1 and the sum reproduces Z term by term.
  double sum = 0.0;
  for (int t = 0; t < w.steps; ++t) {
    sum += w.z[static_cast<size_t>(t)] *
           (static_cast<double>(counts[static_cast<size_t>(t)]) / static_cast<double>(w.step));
  }
  return sum / w.big_z;
}

std::vector<int> RanksFromOrder(std::span<const int> order) {
  std::vector<int> rank(order.size());
  for (size_t r = 0; r < order.size(); ++r) rank[static_cast<size_t>(order[r])] = static_cast<int>(r);
  return rank;
}

Eigen::MatrixXd TopEigenvectors(const Eigen::MatrixXd& sym, int count, Eigen::VectorXd* values) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kEmbeddingFailed, "eigen-decomposition did not converge");
  }
  const Eigen::Index n = sym.rows();
  // Eigen returns ascending eigenvalues; reverse so column 0 is the largest.
  Eigen::MatrixXd vecs(n, count);
  Eigen::VectorXd vals(n);
  for (Eigen::Index i = 0; i < n; ++i) vals(i) = solver.eigenvalues()(n - 1 - i);
  for (int c = 0; c < count; ++c) vecs.col(c) = solver.eigenvectors().col(n - 1 - c);
  if (values) *values = vals;
  return vecs;
}

// Lloyd's k-means with k-means++ seeding; best of `restarts` by inertia.
std::vector<int> KMeans(const Eigen::MatrixXd& points, int k, uint64_t seed, int restarts) {
  const Eigen::Index n = points.rows();
  std::mt19937_64 rng(seed);
  std::vector<int> best_assign(static_cast<size_t>(n), 0);
  double best_inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < std::max(1, restarts); ++run) {
    Eigen::MatrixXd centers(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = points.row(first(rng));
    std::vector<double> d2(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        d2[static_cast<size_t>(i)] = std::min(d2[static_cast<size_t>(i)],
                                              (points.row(i) - centers.row(c - 1)).squaredNorm());
        total += d2[static_cast<size_t>(i)];
      }
      Eigen::Index pick = 0;
      if (total > 0.0) {
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        for (; pick + 1 < n; ++pick) {
          if (r < d2[static_cast<size_t>(pick)]) break;
          r -= d2[static_cast<size_t>(pick)];
        }
      }
      centers.row(c) = points.row(pick);
    }

    std::vector<int> assign(static_cast<size_t>(n), -1);
    double inertia = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double d = (points.row(i) - centers.row(c)).squaredNorm();
          if (d < bd) {
            bd = d;
            best = c;
          }
        }
        inertia += bd;
        if (assign[static_cast<size_t>(i)] != best) {
          assign[static_cast<size_t>(i)] = best;
          changed = true;
        }
      }
      if (!changed) break;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
      std::vector<int> counts(static_cast<size_t>(k), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[static_cast<size_t>(i)]) += points.row(i);
        ++counts[static_cast<size_t>(assign[static_cast<size_t>(i)])];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<size_t>(c)] > 0) {
          centers.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
          continue;
        }
        // Empty cluster: restart it at the point farthest from its centre.
        Eigen::Index far = 0;
        double fd = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double d =
              (points.row(i) - centers.row(assign[static_cast<size_t>(i)])).squaredNorm();
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_assign = assign;
    }
  }
  return best_assign;
}

// D^-1/2 W D^-1/2 for the self-tuning Gaussian affinity
// W_ij = exp(-d_ij^2 / (s_i s_j)), s_i = distance to the 7th nearest neighbour.
Eigen::MatrixXd NormalizedAffinity(const Eigen::MatrixXd& dist2) {
  const Eigen::Index n = dist2.rows();
  std::vector<double> scale(static_cast<size_t>(n));
  const Eigen::Index nb = std::min<Eigen::Index>(kSelfTuningNeighbor, n - 1);
  std::vector<double> row(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<size_t>(j)] = dist2(i, j);
    std::nth_element(row.begin(), row.begin() + nb, row.end());
    scale[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, row[static_cast<size_t>(nb)]));
  }
  double floor_scale = 0.0;
  for (double s : scale) floor_scale = std::max(floor_scale, s);
  floor_scale = std::max(floor_scale * 1e-6, 1e-12);
  for (double& s : scale) s = std::max(s, floor_scale);

  Eigen::MatrixXd affinity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      affinity(i, j) = i == j ? 0.0
                              : std::exp(-std::max(0.0, dist2(i, j)) /
                                         (scale[static_cast<size_t>(i)] * scale[static_cast<size_t>(j)]));
    }
  }
  Eigen::VectorXd inv_sqrt_deg = affinity.rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i) {
    inv_sqrt_deg(i) = inv_sqrt_deg(i) > 0.0 ? 1.0 / std::sqrt(inv_sqrt_deg(i)) : 0.0;
  }
  return inv_sqrt_deg.asDiagonal() * affinity * inv_sqrt_deg.asDiagonal();
}

// Spectral clustering (Ng-Jordan-Weiss) on the embedded points.
std::vector<int> SpectralCluster(const Eigen::MatrixXd& embedding, int k, uint64_t seed,
                                 int restarts) {
  const Eigen::Index n = embedding.rows();
  if (k <= 1 || n <= 1) return std::vector<int>(static_cast<size_t>(n), 0);
  Eigen::MatrixXd dist2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double d = (embedding.row(i) - embedding.row(j)).squaredNorm();
      dist2(i, j) = d;
      dist2(j, i) = d;
    }
  }
  Eigen::MatrixXd vecs = TopEigenvectors(NormalizedAffinity(dist2), k, nullptr);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = vecs.row(i).norm();
    if (norm > 0.0) vecs.row(i) /= norm;
  }
  return KMeans(vecs, k, seed, restarts);
}

std::vector<uint64_t> ToBits(std::span<const int> set, size_t words) {
  std::vector<uint64_t> bits(words, 0);
  for (int h : set) bits[static_cast<size_t>(h) / 64] |= uint64_t{1} << (static_cast<size_t>(h) % 64);
  return bits;
}

double JaccardBits(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b) {
  int inter = 0;
  int uni = 0;
  for (size_t w = 0; w < a.size(); ++w) {
    inter += std::popcount(a[w] & b[w]);
    uni += std::popcount(a[w] | b[w]);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(uni - inter) / static_cast<double>(uni);
}

}  // namespace

OrderedResidues::OrderedResidues(size_t n, size_t m, std::span<const double> residuals)
    : n_(n), m_(m), order_(n * m), rank_(n * m), sorted_(n * m) {
  if (residuals.size() != n * m) {
    throw Error(ErrorCode::kInvalidArgument, "residual matrix has the wrong size");
  }
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one hypothesis");
  for (size_t i = 0; i < n; ++i) {
    int* order = order_.data() + i * m;
    const double* row = residuals.data() + i * m;
    std::iota(order, order + m, 0);
    std::stable_sort(order, order + m, [row](int a, int b) {
      return row[static_cast<size_t>(a)] < row[static_cast<size_t>(b)];
    });
    for (size_t r = 0; r < m; ++r) {
      rank_[i * m + static_cast<size_t>(order[r])] = static_cast<int>(r);
      sorted_[i * m + r] = row[static_cast<size_t>(order[r])];
    }
  }
}

OrderedResidues ComputeOrderedResidues(std::span<const Correspondence> matches,
                                       std::span<const Homography> hypotheses) {
  const size_t n = matches.size();
  const size_t m = hypotheses.size();
  std::vector<double> residuals(n * m);
  ParallelFor(n, [&](size_t i) {
    for (size_t j = 0; j < m; ++j) {
      residuals[i * m + j] = TransferResidualOrInf(hypotheses[j], matches[i]);
    }
  });
  return OrderedResidues(n, m, residuals);
}

OrkWeights OrkWeights::Resolve(const OrkConfig& cfg, size_t hypothesis_count) {
  if (hypothesis_count == 0) throw Error(ErrorCode::kInvalidArgument, "no hypotheses");
  OrkWeights w;
  const int m = static_cast<int>(hypothesis_count);
  w.step = cfg.step > 0 ? cfg.step : std::max(1, m / 20);
  if (w.step > m) {
    throw Error(ErrorCode::kInvalidArgument, "ork.step exceeds hypothesis count");
  }
  w.steps = m / w.step;
  if (cfg.z.empty()) {
    for (int t = 1; t <= w.steps; ++t) w.z.push_back(1.0 / t);
  } else {
    if (cfg.z.size() < static_cast<size_t>(w.steps)) {
      throw Error(ErrorCode::kInvalidArgument, "ork.z needs one weight per step");
    }
    w.z.assign(cfg.z.begin(), cfg.z.begin() + w.steps);
    for (double z : w.z) {
      if (!(z > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ork.z weights must be positive");
    }
  }
  w.big_z = 0.0;
  for (double z : w.z) w.big_z += z;
  return w;
}

double Doik(std::span<const int> a, std::span<const int> b, int t, const OrkWeights& w) {
  if (t < 1 || t > w.steps) throw Error(ErrorCode::kInvalidArgument, "DOIK step out of range");
  auto shared_prefix = [&](size_t len) {
    std::vector<char> in_a(a.size(), 0);
    for (size_t r = 0; r < len; ++r) in_a[static_cast<size_t>(a[r])] = 1;
    int shared = 0;
    for (size_t r = 0; r < len; ++r) shared += in_a[static_cast<size_t>(b[r])];
    return shared;
  };
  const size_t hi = static_cast<size_t>(t) * static_cast<size_t>(w.step);
  const size_t lo = hi - static_cast<size_t>(w.step);
  return static_cast<double>(shared_prefix(hi) - shared_prefix(lo)) / w.step;
}

double OrkKernel(std::span<const int> a, std::span<const int> b, const OrkWeights& w) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidArgument, "ordered rows differ in length");
  }
  const std::vector<int> ra = RanksFromOrder(a);
  const std::vector<int> rb = RanksFromOrder(b);
  const std::vector<int> step_of_rank = StepOfRank(a.size(), w);
  std::vector<int> counts;
  return KernelFromRanks(ra, rb, step_of_rank, w, counts);
}

Eigen::MatrixXd KernelMatrix(const OrderedResidues& residues, const OrkWeights& w) {
  const size_t n = residues.size();
  const std::vector<int> step_of_rank = StepOfRank(residues.hypothesis_count(), w);
  Eigen::MatrixXd k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  ParallelFor(n, [&](size_t i) {
    std::vector<int> counts;
    for (size_t j = i; j < n; ++j) {
      const double v = KernelFromRanks(residues.Rank(i), residues.Rank(j), step_of_rank, w, counts);
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  });
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i);
  }
  return k;
}

std::vector<double> HeldOutBestResiduals(std::span<const Correspondence> matches,
                                         std::span<const Hypothesis> hypotheses,
                                         const OrderedResidues& residues) {
  std::unordered_map<int64_t, size_t> index_of;
  for (size_t i = 0; i < matches.size(); ++i) index_of.emplace(matches[i].id, i);
  std::vector<std::vector<int>> sampled_in(matches.size());
  for (size_t h = 0; h < hypotheses.size(); ++h) {
    for (int64_t id : hypotheses[h].source_ids) {
      const auto it = index_of.find(id);
      if (it != index_of.end()) sampled_in[it->second].push_back(static_cast<int>(h));
    }
  }
  std::vector<double> best(matches.size(), std::numeric_limits<double>::infinity());
  for (size_t i = 0; i < matches.size(); ++i) {
    const auto order = residues.Order(i);
    const auto sorted = residues.Sorted(i);
    for (size_t r = 0; r < order.size(); ++r) {
      if (std::find(sampled_in[i].begin(), sampled_in[i].end(), order[r]) == sampled_in[i].end()) {
        best[i] = sorted[r];
        break;
      }
    }
  }
  return best;
}

double RobustNoiseScale(std::span<const double> best) {
  std::vector<double> finite;
  finite.reserve(best.size());
  for (double b : best) {
    if (std::isfinite(b)) finite.push_back(b);
  }
  return 1.4826 * Median(std::move(finite));
}

int EigengapClusterCount(std::span<const double> descending, int max_clusters) {
  const int limit = std::min<int>(max_clusters, static_cast<int>(descending.size()) - 1);
  if (limit < 1) return 1;
  int best = 1;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int c = 1; c <= limit; ++c) {
    const double gap = descending[static_cast<size_t>(c - 1)] - descending[static_cast<size_t>(c)];
    if (gap > best_gap) {
      best_gap = gap;
      best = c;
    }
  }
  return best;
}

InitialPatchReport InitialPatches(std::span<const Correspondence> matches,
                                  std::span<const Hypothesis> hypotheses, const OrkConfig& ork,
                                  const ClusterConfig& cluster) {
  if (cluster.max_planes < 1) {
    throw Error(ErrorCode::kInvalidArgument, "cluster.max_planes must be >= 1");
  }
  std::vector<Homography> hs;
  hs.reserve(hypotheses.size());
  for (const Hypothesis& h : hypotheses) hs.push_back(h.h);
  const OrderedResidues residues = ComputeOrderedResidues(matches, hs);
  const OrkWeights weights = OrkWeights::Resolve(ork, hs.size());

  InitialPatchReport report;
  report.best_residual = HeldOutBestResiduals(matches, hypotheses, residues);
  report.outlier_threshold =
      cluster.outlier_threshold > 0.0
          ? cluster.outlier_threshold
          : std::max(kMinOutlierThreshold, 3.0 * RobustNoiseScale(report.best_residual));
  std::vector<int> inliers;
  for (size_t i = 0; i < residues.size(); ++i) {
    if (report.best_residual[i] <= report.outlier_threshold) inliers.push_back(static_cast<int>(i));
  }
  std::vector<int> labels(matches.size(), kOutlier);
  if (inliers.size() <= 1) {
    for (int i : inliers) labels[static_cast<size_t>(i)] = 0;
    report.clusters_requested = static_cast<int>(inliers.size());
    report.labeling = CompactLabels(labels);
    return report;
  }

  const Eigen::Index n = static_cast<Eigen::Index>(inliers.size());
  Eigen::MatrixXd k(n, n);
  {
    const std::vector<int> step_of_rank = StepOfRank(residues.hypothesis_count(), weights);
    ParallelFor(inliers.size(), [&](size_t a) {
      std::vector<int> counts;
      for (size_t b = a; b < inliers.size(); ++b) {
        k(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = KernelFromRanks(
            residues.Rank(static_cast<size_t>(inliers[a])),
            residues.Rank(static_cast<size_t>(inliers[b])), step_of_rank, weights, counts);
      }
    });
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i);
    }
  }

  // Cluster count from the eigengap of the affinity built on feature-space
  // distances, ||phi_i - phi_j||^2 = k_ii + k_jj - 2 k_ij.
  Eigen::MatrixXd feature_dist2(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) feature_dist2(i, j) = k(i, i) + k(j, j) - 2.0 * k(i, j);
  }
  Eigen::VectorXd spectrum;
  TopEigenvectors(NormalizedAffinity(feature_dist2), 1, &spectrum);
  const int probe = std::min<int>(cluster.max_planes + 1, static_cast<int>(n));
  report.affinity_spectrum.assign(spectrum.data(), spectrum.data() + probe);
  // The leading eigenvalue is always 1. A second group weakly coupled to the
  // first pushes the next one towards 1; below the cutoff there is one structure.
  int clusters = 1;
  if (cluster.max_planes > 1 && report.affinity_spectrum.size() > 2 &&
      report.affinity_spectrum[1] >= cluster.single_structure_cutoff) {
    clusters = 1 + EigengapClusterCount(std::span<const double>(report.affinity_spectrum).subspan(1),
                                        cluster.max_planes - 1);
  }
  clusters = std::clamp(static_cast<int>(std::lround(clusters * cluster.oversegmentation)), 1,
                        std::min<int>(cluster.max_planes, static_cast<int>(n)));
  report.clusters_requested = clusters;

  // Kernel PCA: top-`clusters` components of the centred kernel.
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const double total_mean = row_mean.mean();
  Eigen::MatrixXd centred = k;
  centred.rowwise() -= row_mean.transpose();
  centred.colwise() -= row_mean;
  centred.array() += total_mean;
  Eigen::VectorXd kpca_values;
  Eigen::MatrixXd embedding = TopEigenvectors(centred, clusters, &kpca_values);
  for (int c = 0; c < clusters; ++c) {
    embedding.col(c) *= std::sqrt(std::max(0.0, kpca_values(c)));
  }

  const std::vector<int> assign =
      SpectralCluster(embedding, clusters, cluster.seed, cluster.kmeans_restarts);
  for (size_t a = 0; a < inliers.size(); ++a) labels[static_cast<size_t>(inliers[a])] = assign[a];
  report.labeling = CompactLabels(labels);
  return report;
}

double JaccardDistance(std::span<const int> x, std::span<const int> y) {
  size_t inter = 0;
  size_t i = 0;
  size_t j = 0;
  while (i < x.size() && j < y.size()) {
    if (x[i] == y[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (x[i] < y[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const size_t uni = x.size() + y.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(uni - inter) / static_cast<double>(uni);
}

std::vector<std::vector<int>> PreferenceSets(std::span<const Correspondence> matches,
                                             std::span<const Homography> hypotheses,
                                             double epsilon) {
  std::vector<std::vector<int>> prefs(matches.size());
  ParallelFor(matches.size(), [&](size_t i) {
    for (size_t j = 0; j < hypotheses.size(); ++j) {
      if (TransferResidualOrInf(hypotheses[j], matches[i]) <= epsilon) {
        prefs[i].push_back(static_cast<int>(j));
      }
    }
  });
  return prefs;
}

JLinkageResult JLinkageCluster(std::span<const Correspondence> matches,
                               std::span<const Homography> hypotheses, double epsilon,
                               size_t min_cluster_size) {
  if (hypotheses.empty()) throw Error(ErrorCode::kInvalidArgument, "no hypotheses");
  const size_t n = matches.size();
  const size_t words = (hypotheses.size() + 63) / 64;
  const std::vector<std::vector<int>> prefs = PreferenceSets(matches, hypotheses, epsilon);

  std::vector<std::vector<uint64_t>> bits(n);
  std::vector<std::vector<int>> members(n);
  std::vector<bool> alive(n, true);
  for (size_t i = 0; i < n; ++i) {
    bits[i] = ToBits(prefs[i], words);
    members[i] = {static_cast<int>(i)};
  }
  std::vector<double> nn_dist(n, 1.0);
  std::vector<size_t> nn(n, 0);
  auto refresh = [&](size_t i) {
    nn_dist[i] = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) {
      if (j == i || !alive[j]) continue;
      const double d = JaccardBits(bits[i], bits[j]);
      if (d < nn_dist[i]) {
        nn_dist[i] = d;
        nn[i] = j;
      }
    }
  };
  for (size_t i = 0; i < n; ++i) refresh(i);

  JLinkageResult result;
  for (;;) {
    size_t best = n;
    for (size_t i = 0; i < n; ++i) {
      if (alive[i] && (best == n || nn_dist[i] < nn_dist[best])) best = i;
    }
    if (best == n || !(nn_dist[best] < 1.0)) break;
    const size_t a = std::min(best, nn[best]);
    const size_t b = std::max(best, nn[best]);
    for (size_t w = 0; w < words; ++w) bits[a][w] &= bits[b][w];
    members[a].insert(members[a].end(), members[b].begin(), members[b].end());
    std::sort(members[a].begin(), members[a].end());
    alive[b] = false;
    members[b].clear();
    ++result.merges;
    refresh(a);
    for (size_t i = 0; i < n; ++i) {
      if (!alive[i] || i == a) continue;
      if (nn[i] == a || nn[i] == b) {
        refresh(i);
      } else {
        const double d = JaccardBits(bits[i], bits[a]);
        if (d < nn_dist[i]) {
          nn_dist[i] = d;
          nn[i] = a;
        }
      }
    }
  }

  std::vector<int> labels(n, kOutlier);
  int next = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    std::vector<int> pref;
    for (size_t h = 0; h < hypotheses.size(); ++h) {
      if (bits[i][h / 64] >> (h % 64) & 1) pref.push_back(static_cast<int>(h));
    }
    result.clusters.push_back(members[i]);
    result.cluster_preferences.push_back(std::move(pref));
    if (members[i].size() >= min_cluster_size) {
      for (int m : members[i]) labels[static_cast<size_t>(m)] = next;
      ++next;
    }
  }
  result.labeling = CompactLabels(labels);
  return result;
}

double FouheyDistance(std::span<const int> x, std::span<const int> y,
                      std::span<const Correspondence> matches) {
  std::vector<int> uni;
  std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(uni));
  if (uni.size() < 4) {
    throw Error(ErrorCode::kDegenerateConfiguration, "union has fewer than 4 matches");
  }
  const Homography h = EstimateHomography(matches, uni);
  double sum = 0.0;
  for (int i : uni) sum += TransferResidualOrInf(h, matches[static_cast<size_t>(i)]);
  return sum / static_cast<double>(uni.size());
}

MergeResult ResidueMergeBaseline(const PatchLabeling& patches,
                                 std::span<const Correspondence> matches, double threshold) {
  if (patches.patch_count < 1) throw Error(ErrorCode::kInvalidArgument, "no patches to merge");
  std::vector<std::vector<int>> groups = patches.Members();
  MergeResult result;
  for (;;) {
    double best_cost = std::numeric_limits<double>::infinity();
    size_t best_a = 0;
    size_t best_b = 0;
    for (size_t a = 0; a < groups.size(); ++a) {
      for (size_t b = a + 1; b < groups.size(); ++b) {
        std::vector<int> uni;
        std::set_union(groups[a].begin(), groups[a].end(), groups[b].begin(), groups[b].end(),
                       std::back_inserter(uni));
        double cost = 0.0;
        try {
          const Homography h = EstimateHomography(matches, uni);
          for (int i : uni) cost += TransferResidualOrInf(h, matches[static_cast<size_t>(i)]);
        } catch (const Error&) {
          continue;
        }
        if (cost < best_cost) {
          best_cost = cost;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (!(best_cost < threshold)) break;
    result.merges.emplace_back(groups[best_a].front(), groups[best_b].front());
    std::vector<int> merged;
    std::set_union(groups[best_a].begin(), groups[best_a].end(), groups[best_b].begin(),
                   groups[best_b].end(), std::back_inserter(merged));
    groups[best_a] = std::move(merged);
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  std::vector<int> labels(patches.labels.size(), kOutlier);
  for (size_t g = 0; g < groups.size(); ++g) {
    for (int i : groups[g]) labels[static_cast<size_t>(i)] = static_cast<int>(g);
  }
  result.labeling = CompactLabels(labels);
  return result;
}

ResidueTable SecondMinResidueTable(const PatchLabeling& patches,
                                   std::span<const Correspondence> matches) {
  if (patches.patch_count < 2) {
    throw Error(ErrorCode::kInvalidArgument, "residue table needs at least two patches");
  }
  const auto groups = patches.Members();
  std::vector<Homography> hs;
  hs.reserve(groups.size());
  for (const auto& g : groups) hs.push_back(EstimateHomography(matches, g));

  const Eigen::Index p = static_cast<Eigen::Index>(groups.size());
  ResidueTable table;
  table.residual.resize(p, p);
  for (Eigen::Index r = 0; r < p; ++r) {
    for (Eigen::Index c = 0; c < p; ++c) {
      double sum = 0.0;
      for (int i : groups[static_cast<size_t>(c)]) {
        sum += TransferResidualOrInf(hs[static_cast<size_t>(r)], matches[static_cast<size_t>(i)]);
      }
      table.residual(r, c) = sum / static_cast<double>(groups[static_cast<size_t>(c)].size());
    }
  }
  for (Eigen::Index c = 0; c < p; ++c) {
    std::vector<int> rows(static_cast<size_t>(p));
    std::iota(rows.begin(), rows.end(), 0);
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) {
      return table.residual(a, c) < table.residual(b, c);
    });
    table.first_min.push_back(rows[0]);
    table.second_min.push_back(rows[1]);
  }
  return table;
}

}  // namespace planemerge
