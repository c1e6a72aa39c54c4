#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planemerge/types.h"

namespace planemerge {

// 3x3 projective transform held in canonical form: unit Frobenius norm and
// the entry of largest magnitude positive. Two homographies that differ only
// by a nonzero scale compare equal after construction.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity() / std::sqrt(3.0)) {}

  // Throws DegenerateConfiguration when `m` is singular or non-finite.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography Identity() { return Homography(); }

  const Eigen::Matrix3d& matrix() const { return m_; }

  // Maps an image-1 point into image 2. Throws PointAtInfinity when the third
  // homogeneous coordinate is below 1e-12 in magnitude.
  Eigen::Vector2d Transfer(const Eigen::Vector2d& x) const;

  Homography Inverse() const { return Homography(m_.inverse()); }

 private:
  Eigen::Matrix3d m_;
};

// Returns `m` scaled to unit Frobenius norm with its largest-magnitude entry
// positive (first such entry in row-major order on ties).
Eigen::Matrix3d CanonicalizeHomography(const Eigen::Matrix3d& m);

struct Intrinsics {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();

  static Intrinsics Identity() { return {}; }
  static Intrinsics FromFocal(double fx, double fy, double cx, double cy);
};

// Throws InvalidArgument unless `k` is upper triangular with positive focal
// entries and k(2,2) == 1.
void ValidateIntrinsics(const Intrinsics& intrinsics);

// Relative camera motion X2 = R * X1 + T.
struct Motion {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Plane-induced homography parameters: H ~ K (R + T N^t / D) K^-1 with T a
// unit vector, N the unit plane normal in the camera-1 frame and D the plane
// distance measured in baseline units.
struct PlaneDecomposition {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double distance = 1.0;

  Motion motion() const { return {rotation, translation}; }
};

enum class ResidualKind {
  kOneWay,     // |x' - H x|
  kSymmetric,  // |x' - H x| + |x - H^-1 x'|
};

// Normalized DLT with Hartley conditioning of both point sets. Needs at least
// four matches. Throws DegenerateConfiguration when the design matrix has
// rank below eight (smallest retained singular value < 1e-8 * largest).
Homography EstimateHomography(std::span<const Correspondence> matches);
Homography EstimateHomography(std::span<const Correspondence> matches,
                              std::span<const int> subset);

double TransferResidual(const Homography& h, const Correspondence& c);
double Residual(const Homography& h, const Correspondence& c, ResidualKind kind);
// TransferResidual, but +infinity instead of PointAtInfinity.
double TransferResidualOrInf(const Homography& h, const Correspondence& c) noexcept;

Homography ComposeHomography(const PlaneDecomposition& d, const Intrinsics& intrinsics);

struct DecomposeOptions {
  // Matches used for the cheirality filter and candidate scoring. When empty
  // every algebraically valid candidate is returned.
  std::span<const Correspondence> support;
  // When set, candidates are ranked by motion distance to this prior instead
  // of by summed transfer residual over the support.
  std::optional<Motion> motion_prior;
  // Fraction of support points that must lie in front of both cameras.
  double min_visible_fraction = 1.0;
};

// Analytic SVD decomposition of a plane-induced homography. Produces the four
// algebraic solutions of the Euclidean homography with the sign fixed by
// det > 0, drops those that put support points behind either camera, and
// ranks the rest. Throws PureRotation when the Euclidean homography is a
// rotation within 1e-9 and DecompositionFailed when nothing survives.
std::vector<PlaneDecomposition> DecomposeHomography(const Homography& h,
                                                    const Intrinsics& intrinsics,
                                                    const DecomposeOptions& options = {});

// Geodesic rotation angle plus translation-direction angle, in radians.
double MotionDistance(const Motion& a, const Motion& b);

// Angle between two directions in radians, in [0, pi].
double AngleBetween(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// Relative Frobenius error between canonical forms.
double RelativeHomographyError(const Homography& a, const Homography& b);

}  // namespace planemerge
