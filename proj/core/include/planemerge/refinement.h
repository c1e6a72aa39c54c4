#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "planemerge/geometry.h"
#include "planemerge/types.h"

namespace planemerge {

// Undirected graph over match indices (positions in the matches span).
struct MatchGraph {
  size_t node_count = 0;
  std::vector<std::pair<int, int>> edges;  // (a, b) with a < b, sorted, unique
  std::vector<double> lengths;             // image-1 pixels, parallel to edges
  std::vector<std::array<int, 3>> triangles;

  std::vector<std::vector<int>> Adjacency() const;
};

// Delaunay triangulation of the image-1 coordinates. Coincident points are
// joined to their first occurrence by a zero-length edge; fully collinear
// input yields the chain of consecutive points along the line.
// Throws TooFewPoints with fewer than 3 matches.
MatchGraph DelaunayTriangulate(std::span<const Correspondence> matches);
MatchGraph DelaunayTriangulate(std::span<const Eigen::Vector2d> points);

double MedianEdgeLength(const MatchGraph& graph);

// Default cut threshold: 3x the median Delaunay edge length.
double DefaultCutThreshold(const MatchGraph& graph);

// Keeps edges joining two matches of the same patch with length <= threshold;
// each connected component becomes a patch, components smaller than min_size
// become outliers.
PatchLabeling CutMeshByDistance(const MatchGraph& graph, const PatchLabeling& patches,
                                double threshold, size_t min_size = 10);

struct MeshCut {
  PatchLabeling patches;
  std::vector<size_t> kept_edges;  // indices into graph.edges, inside surviving patches
};

// CutMeshByDistance plus the edges that make up each patch's mesh.
MeshCut CutMesh(const MatchGraph& graph, const PatchLabeling& patches, double threshold,
                size_t min_size = 10);

struct PlanarPatch {
  int id = 0;
  std::vector<int> members;
  Homography h;
  std::optional<PlaneDecomposition> plane;
  bool valid = false;

  const Eigen::Vector3d& normal() const { return plane->normal; }
};

struct PlaneModelOptions {
  size_t min_members = 10;
  std::optional<Motion> motion_prior;
  double min_visible_fraction = 0.9;
};

// Fits a homography to the members and decomposes it. Too few members or a
// failed decomposition (pure rotation, cheirality) leave valid = false.
// DegenerateConfiguration from the fit propagates.
PlanarPatch PatchPlaneModel(int id, std::span<const int> members,
                            std::span<const Correspondence> matches, const Intrinsics& intrinsics,
                            const PlaneModelOptions& options = {});

struct LocalPatchConfig {
  int k = 10;
};

void ValidateLocalPatchConfig(const LocalPatchConfig& cfg);

struct LocalNormal {
  std::optional<Eigen::Vector3d> normal;  // empty means unreliable
  std::vector<int> neighborhood;          // the match itself first, then its neighbours

  bool reliable() const { return normal.has_value(); }
};

// Normal from a homography fit to the match and its k nearest same-patch
// neighbours (image-1 distance). Fewer than 4 points in total, or a fit or
// decomposition failure, give an unreliable normal. Outliers get an empty
// neighbourhood.
LocalNormal ComputeLocalNormal(int index, const PatchLabeling& patches,
                               std::span<const Correspondence> matches,
                               const LocalPatchConfig& cfg, const Intrinsics& intrinsics,
                               const std::optional<Motion>& motion_prior = std::nullopt);

std::vector<LocalNormal> ComputeLocalNormals(const PatchLabeling& patches,
                                             std::span<const Correspondence> matches,
                                             const LocalPatchConfig& cfg,
                                             const Intrinsics& intrinsics,
                                             const std::optional<Motion>& motion_prior = std::nullopt);

}  // namespace planemerge
