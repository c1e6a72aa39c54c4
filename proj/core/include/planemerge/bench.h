#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "planemerge/geometry.h"
#include "planemerge/types.h"

namespace planemerge {

struct ScenePlane {
  Eigen::Vector3d normal;  // unit, n . X = distance for points X in camera-1 frame
  double distance = 1.0;
  Eigen::Vector3d color = Eigen::Vector3d::Constant(0.5);
  // Image-1 rectangle the plane may occupy; the default covers any image.
  Eigen::Vector2d extent_lo = Eigen::Vector2d::Zero();
  Eigen::Vector2d extent_hi = Eigen::Vector2d::Constant(1e9);
};

struct SceneSpec {
  std::string name;
  std::vector<ScenePlane> planes;
  Motion motion;  // camera 2 = R * X + t
  Intrinsics intrinsics = Intrinsics::FromFocal(500, 500, 320, 240);
  int width = 640;
  int height = 480;
  double max_depth = 12.0;  // metres; farther surface points are not sampled
  // Planes bound a convex solid seen from outside: a ray meets the solid only
  // if it enters every half-space, and the last plane it enters is visible.
  // Otherwise the nearest plane is visible (room interiors).
  bool convex = false;
  int matches_per_plane = 300;
  double noise_sigma = 0.5;      // pixels, added to view 2
  double color_sigma = 0.02;     // spread of per-match colour means
  double outlier_fraction = 0.1;
  uint64_t seed = 0;
};

// Throws InvalidArgument when the spec is malformed.
void ValidateSceneSpec(const SceneSpec& spec);

struct GeneratedScene {
  Matches matches;  // gt_plane set on every match
  std::vector<Homography> homographies;
  std::vector<Eigen::Vector3d> normals;
};

// Casts uniformly drawn image-1 pixels into the scene, among the planes whose
// extent holds the pixel. Each plane receives matches_per_plane points, then
// outlier_fraction of all matches get a uniform random view-2 point.
// Deterministic per seed.
// Throws PlaneNotVisible when some plane cannot be filled.
GeneratedScene GenerateScene(const SceneSpec& spec);

std::vector<std::string> PresetNames();

// corner, box, corridor, lab. Throws InvalidArgument for other names.
SceneSpec Preset(std::string_view name, uint64_t seed = 0);

// Maximum-weight assignment on a rows x cols weight matrix; returns the
// column of each row or -1.
std::vector<int> MaxWeightAssignment(const Eigen::MatrixXd& weight);

// Percentage of ground-truth inliers whose predicted label does not map to
// their plane under the best one-to-one label assignment. Predicted outliers
// on true inliers count as errors; true outliers are ignored.
double ClassificationError(std::span<const int> predicted, std::span<const int> truth);

struct PsAdTables {
  // Rows are scene planes, columns detected planes. Only matches that are
  // inliers in both labelings are counted.
  Eigen::MatrixXd ps;  // column-normalised percentages
  Eigen::MatrixXd ad;  // row-normalised percentages
};

PsAdTables ComputePsAd(std::span<const int> predicted, std::span<const int> truth);

struct EvalReport {
  double error_percent = 0.0;
  int detected_planes = 0;
  int truth_planes = 0;
  PsAdTables tables;
};

// Throws InvalidArgument when the labelings differ in length.
EvalReport Evaluate(std::span<const int> predicted, std::span<const int> truth);

// Ground-truth labels of a match list (kOutlier where unknown).
std::vector<int> TruthLabels(std::span<const Correspondence> matches);

// Plain-text rendering with "SP I" rows and "PD I" columns.
std::string RenderEvalReport(const EvalReport& report);

std::string Roman(int n);

}  // namespace planemerge
