#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace planemerge {

// Label value for matches that belong to no patch.
inline constexpr int kOutlier = -1;

struct Correspondence {
  int64_t id = 0;
  Eigen::Vector2d x = Eigen::Vector2d::Zero();        // image 1, pixels
  Eigen::Vector2d x_prime = Eigen::Vector2d::Zero();  // image 2, pixels
  std::optional<Eigen::Vector3d> color_mean;          // per-channel mean in [0,1]
  std::optional<int> gt_plane;                        // kOutlier for gt outliers
};

using Matches = std::vector<Correspondence>;

// Throws InvalidArgument if a coordinate is non-finite or a color channel
// leaves [0,1].
void ValidateCorrespondence(const Correspondence& c);

// One label per correspondence, indexed like the match list it was built for.
// Patch ids are contiguous 0..patch_count-1; kOutlier marks unassigned matches.
struct PatchLabeling {
  std::vector<int> labels;
  int patch_count = 0;

  size_t size() const { return labels.size(); }

  // Member indices (into the match list) of each patch.
  std::vector<std::vector<int>> Members() const;
  // Number of non-outlier entries.
  size_t InlierCount() const;
};

// Renumbers labels to be contiguous in order of first appearance. Labels that
// are negative stay kOutlier.
PatchLabeling CompactLabels(std::span<const int> labels);

// Relabels patches with fewer than `min_size` members as kOutlier and compacts.
PatchLabeling DropSmallPatches(const PatchLabeling& labeling, size_t min_size);

// Throws InvalidArgument unless the labeling invariants hold.
void ValidateLabeling(const PatchLabeling& labeling);

}  // namespace planemerge
