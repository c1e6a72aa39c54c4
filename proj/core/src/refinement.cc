#include "planemerge/refinement.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include <boost/polygon/voronoi.hpp>

#include "planemerge/error.h"
#include "planemerge/parallel.h"

namespace planemerge {
namespace {

// Input coordinates are snapped onto an integer grid spanning +-2^28 for the
// exact-predicate Voronoi construction; the Delaunay graph is its dual.
constexpr double kGridHalfSpan = 268435456.0;
// |N / D| in inverse baseline units below which the plane is unobservable.
constexpr double kMinInverseDistance = 1e-6;

struct UnionFind {
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  size_t Find(size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void Unite(size_t a, size_t b) {
    a = Find(a);
    b = Find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<size_t> parent;
};

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

// Plane normal from x' ~ K (R + T m^t) K^-1 x with R, T fixed: every match
// gives [y']x (R y + T y^t m) = 0, linear in m = N / D.
std::optional<Eigen::Vector3d> NormalUnderMotion(std::span<const Correspondence> matches,
                                                 std::span<const int> subset,
                                                 const Intrinsics& intrinsics,
                                                 const Motion& motion) {
  const Eigen::Matrix3d k_inv = intrinsics.k.inverse();
  const Eigen::Vector3d t = motion.translation.normalized();
  Eigen::MatrixXd a(3 * subset.size(), 3);
  Eigen::VectorXd b(3 * subset.size());
  for (size_t r = 0; r < subset.size(); ++r) {
    const Correspondence& c = matches[static_cast<size_t>(subset[r])];
    const Eigen::Vector3d y = k_inv * c.x.homogeneous();
    const Eigen::Vector3d yp = (k_inv * c.x_prime.homogeneous()).normalized();
    const Eigen::Vector3d yp_t = yp.cross(t);
    a.block<3, 3>(3 * static_cast<Eigen::Index>(r), 0) = yp_t * y.transpose();
    b.segment<3>(3 * static_cast<Eigen::Index>(r)) = -yp.cross(motion.rotation * y);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(2) > 1e-9 * sv(0))) return std::nullopt;
  const Eigen::Vector3d m = svd.solve(b);
  if (!m.allFinite() || m.norm() < kMinInverseDistance) return std::nullopt;
  return m.normalized();
}

// Point order along the line when every point lies within 1e-9 * extent of
// the line through the first point and the point farthest from it.
std::optional<std::vector<int>> CollinearOrder(std::span<const Eigen::Vector2d> points,
                                               double extent) {
  size_t far = 0;
  for (size_t i = 1; i < points.size(); ++i) {
    if ((points[i] - points[0]).squaredNorm() > (points[far] - points[0]).squaredNorm()) far = i;
  }
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  if (far == 0) return order;  // all coincident
  const Eigen::Vector2d dir = (points[far] - points[0]).normalized();
  for (const auto& p : points) {
    const Eigen::Vector2d v = p - points[0];
    if (std::abs(dir.x() * v.y() - dir.y() * v.x()) > 1e-9 * extent) return std::nullopt;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dir.dot(points[static_cast<size_t>(a)] - points[0]) <
           dir.dot(points[static_cast<size_t>(b)] - points[0]);
  });
  return order;
}

}  // namespace

std::vector<std::vector<int>> MatchGraph::Adjacency() const {
  std::vector<std::vector<int>> adj(node_count);
  for (const auto& [a, b] : edges) {
    adj[static_cast<size_t>(a)].push_back(b);
    adj[static_cast<size_t>(b)].push_back(a);
  }
  return adj;
}

MatchGraph DelaunayTriangulate(std::span<const Eigen::Vector2d> points) {
  const size_t n = points.size();
  if (n < 3) {
    throw Error(ErrorCode::kTooFewPoints,
                "triangulation needs at least 3 points, got " + std::to_string(n));
  }
  Eigen::Vector2d lo = points[0], hi = points[0];
  for (const auto& p : points) {
    if (!p.allFinite()) throw Error(ErrorCode::kInvalidArgument, "non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = std::max((hi - lo).maxCoeff(), 1e-12);

  MatchGraph graph;
  graph.node_count = n;
  if (const auto order = CollinearOrder(points, extent)) {
    for (size_t r = 0; r + 1 < n; ++r) {
      const int a = (*order)[r], b = (*order)[r + 1];
      graph.edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(graph.edges.begin(), graph.edges.end());
    for (const auto& [a, b] : graph.edges) {
      graph.lengths.push_back((points[static_cast<size_t>(a)] - points[static_cast<size_t>(b)]).norm());
    }
    return graph;
  }

  const Eigen::Vector2d centre = 0.5 * (lo + hi);
  const double scale = 2.0 * kGridHalfSpan / extent * 0.999;

  using GridPoint = boost::polygon::point_data<int>;
  std::map<std::pair<int, int>, int> first_at;
  std::vector<GridPoint> unique;
  std::vector<int> unique_source;  // unique index -> original index
  std::vector<std::pair<int, int>> edges;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d g = (points[i] - centre) * scale;
    const std::pair<int, int> key{static_cast<int>(std::lround(g.x())),
                                  static_cast<int>(std::lround(g.y()))};
    const auto [it, inserted] = first_at.emplace(key, static_cast<int>(i));
    if (!inserted) {
      edges.emplace_back(it->second, static_cast<int>(i));
      continue;
    }
    unique.emplace_back(key.first, key.second);
    unique_source.push_back(static_cast<int>(i));
  }

  if (unique.size() >= 2) {
    boost::polygon::voronoi_diagram<double> vd;
    boost::polygon::construct_voronoi(unique.begin(), unique.end(), &vd);
    for (const auto& e : vd.edges()) {
      const int a = unique_source[e.cell()->source_index()];
      const int b = unique_source[e.twin()->cell()->source_index()];
      if (a < b) edges.emplace_back(a, b);
    }
    for (const auto& v : vd.vertices()) {
      std::vector<int> ring;
      const auto* e = v.incident_edge();
      do {
        ring.push_back(unique_source[e->cell()->source_index()]);
        e = e->rot_next();
      } while (e != v.incident_edge());
      // Cocircular sites share one Voronoi vertex; fan-triangulate the polygon.
      for (size_t k = 1; k + 1 < ring.size(); ++k) {
        std::array<int, 3> tri{ring[0], ring[k], ring[k + 1]};
        graph.triangles.push_back(tri);
        if (ring.size() > 3 && k > 1) {
          edges.emplace_back(std::min(ring[0], ring[k]), std::max(ring[0], ring[k]));
        }
      }
    }
  }
  for (auto& [a, b] : edges) {
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  graph.edges = std::move(edges);
  graph.lengths.reserve(graph.edges.size());
  for (const auto& [a, b] : graph.edges) {
    graph.lengths.push_back((points[static_cast<size_t>(a)] - points[static_cast<size_t>(b)]).norm());
  }
  return graph;
}

MatchGraph DelaunayTriangulate(std::span<const Correspondence> matches) {
  std::vector<Eigen::Vector2d> points;
  points.reserve(matches.size());
  for (const auto& c : matches) points.push_back(c.x);
  return DelaunayTriangulate(points);
}

double MedianEdgeLength(const MatchGraph& graph) { return Median(graph.lengths); }

double DefaultCutThreshold(const MatchGraph& graph) { return 3.0 * MedianEdgeLength(graph); }

MeshCut CutMesh(const MatchGraph& graph, const PatchLabeling& patches, double threshold,
                size_t min_size) {
  if (!(threshold > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cut threshold must be > 0");
  if (patches.labels.size() != graph.node_count) {
    throw Error(ErrorCode::kInvalidArgument, "labeling and graph differ in size");
  }
  UnionFind uf(graph.node_count);
  std::vector<size_t> kept;
  for (size_t e = 0; e < graph.edges.size(); ++e) {
    const auto [a, b] = graph.edges[e];
    const int la = patches.labels[static_cast<size_t>(a)];
    if (la == kOutlier || la != patches.labels[static_cast<size_t>(b)]) continue;
    if (graph.lengths[e] > threshold) continue;
    uf.Unite(static_cast<size_t>(a), static_cast<size_t>(b));
    kept.push_back(e);
  }
  std::vector<int> labels(graph.node_count, kOutlier);
  for (size_t i = 0; i < graph.node_count; ++i) {
    if (patches.labels[i] != kOutlier) labels[i] = static_cast<int>(uf.Find(i));
  }
  MeshCut cut;
  cut.patches = DropSmallPatches(CompactLabels(labels), min_size);
  for (size_t e : kept) {
    if (cut.patches.labels[static_cast<size_t>(graph.edges[e].first)] != kOutlier) cut.kept_edges.push_back(e);
  }
  return cut;
}

PatchLabeling CutMeshByDistance(const MatchGraph& graph, const PatchLabeling& patches,
                                double threshold, size_t min_size) {
  return CutMesh(graph, patches, threshold, min_size).patches;
}

PlanarPatch PatchPlaneModel(int id, std::span<const int> members,
                            std::span<const Correspondence> matches, const Intrinsics& intrinsics,
                            const PlaneModelOptions& options) {
  PlanarPatch patch;
  patch.id = id;
  patch.members.assign(members.begin(), members.end());
  if (members.size() < options.min_members || members.size() < 4) return patch;
  patch.h = EstimateHomography(matches, members);

  std::vector<Correspondence> support;
  support.reserve(members.size());
  for (int i : members) support.push_back(matches[static_cast<size_t>(i)]);
  DecomposeOptions dopt;
  dopt.support = support;
  dopt.motion_prior = options.motion_prior;
  dopt.min_visible_fraction = options.min_visible_fraction;
  try {
    const auto candidates = DecomposeHomography(patch.h, intrinsics, dopt);
    patch.plane = candidates.front();
    patch.valid = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kPureRotation && e.code() != ErrorCode::kDecompositionFailed) throw;
  }
  return patch;
}

void ValidateLocalPatchConfig(const LocalPatchConfig& cfg) {
  if (cfg.k < 4) throw Error(ErrorCode::kInvalidArgument, "local_patch.k must be >= 4");
}

LocalNormal ComputeLocalNormal(int index, const PatchLabeling& patches,
                               std::span<const Correspondence> matches,
                               const LocalPatchConfig& cfg, const Intrinsics& intrinsics,
                               const std::optional<Motion>& motion_prior) {
  LocalNormal out;
  const int label = patches.labels[static_cast<size_t>(index)];
  if (label == kOutlier) return out;
  const Eigen::Vector2d& p = matches[static_cast<size_t>(index)].x;
  std::vector<std::pair<double, int>> near;
  for (size_t j = 0; j < matches.size(); ++j) {
    if (static_cast<int>(j) == index || patches.labels[j] != label) continue;
    near.emplace_back((matches[j].x - p).squaredNorm(), static_cast<int>(j));
  }
  const size_t take = std::min(near.size(), static_cast<size_t>(cfg.k));
  std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(take), near.end());
  out.neighborhood.push_back(index);
  for (size_t q = 0; q < take; ++q) out.neighborhood.push_back(near[q].second);
  if (out.neighborhood.size() < 4) return out;

  if (motion_prior && motion_prior->translation.norm() > 0.0) {
    out.normal = NormalUnderMotion(matches, out.neighborhood, intrinsics, *motion_prior);
    return out;
  }
  try {
    const Homography h = EstimateHomography(matches, out.neighborhood);
    std::vector<Correspondence> support;
    for (int i : out.neighborhood) support.push_back(matches[static_cast<size_t>(i)]);
    DecomposeOptions dopt;
    dopt.support = support;
    dopt.motion_prior = motion_prior;
    out.normal = DecomposeHomography(h, intrinsics, dopt).front().normal;
  } catch (const Error&) {
    out.normal.reset();
  }
  return out;
}

std::vector<LocalNormal> ComputeLocalNormals(const PatchLabeling& patches,
                                             std::span<const Correspondence> matches,
                                             const LocalPatchConfig& cfg,
                                             const Intrinsics& intrinsics,
                                             const std::optional<Motion>& motion_prior) {
  ValidateLocalPatchConfig(cfg);
  std::vector<LocalNormal> out(matches.size());
  ParallelFor(matches.size(), [&](size_t i) {
    out[i] = ComputeLocalNormal(static_cast<int>(i), patches, matches, cfg, intrinsics,
                                motion_prior);
  });
  return out;
}

}  // namespace planemerge
