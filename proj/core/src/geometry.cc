#include "planemerge/geometry.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "planemerge/error.h"

namespace planemerge {
namespace {

constexpr double kRankTolerance = 1e-8;
constexpr double kInfinityTolerance = 1e-12;
constexpr double kPureRotationTolerance = 1e-9;

// Similarity that moves the centroid to the origin and the mean distance from
// it to sqrt(2).
template <typename PointFn>
Eigen::Matrix3d HartleyTransform(size_t n, PointFn point) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < n; ++i) centroid += point(i);
  centroid /= static_cast<double>(n);
  double mean_dist = 0.0;
  for (size_t i = 0; i < n; ++i) mean_dist += (point(i) - centroid).norm();
  mean_dist /= static_cast<double>(n);
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

Homography EstimateFromAccessor(size_t n, auto get) {
  if (n < 4) {
    throw Error(ErrorCode::kInsufficientMatches,
                "homography needs at least 4 matches, got " + std::to_string(n));
  }
  for (size_t i = 0; i < n; ++i) {
    const Correspondence& c = get(i);
    if (!c.x.allFinite() || !c.x_prime.allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite match coordinate");
    }
  }
  const Eigen::Matrix3d t1 = HartleyTransform(n, [&](size_t i) { return get(i).x; });
  const Eigen::Matrix3d t2 = HartleyTransform(n, [&](size_t i) { return get(i).x_prime; });

  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Correspondence& c = get(i);
    const Eigen::Vector3d p = t1 * c.x.homogeneous();
    const Eigen::Vector3d q = t2 * c.x_prime.homogeneous();
    const double u = q.x() / q.z();
    const double v = q.y() / q.z();
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << 0, 0, 0, -p.x(), -p.y(), -p.z(), v * p.x(), v * p.y(), v * p.z();
    a.row(r + 1) << p.x(), p.y(), p.z(), 0, 0, 0, -u * p.x(), -u * p.y(), -u * p.z();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  // The ninth singular value is the (ideally zero) residual; the eighth
  // decides whether the solution is unique.
  if (sv.size() < 8 || sv(7) < kRankTolerance * sv(0)) {
    throw Error(ErrorCode::kDegenerateConfiguration,
                "design matrix is rank deficient (collinear or coincident points)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(t2.inverse() * hn * t1);
}

}  // namespace

Eigen::Matrix3d CanonicalizeHomography(const Eigen::Matrix3d& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "homography has zero or non-finite norm");
  }
  Eigen::Matrix3d out = m / norm;
  int best = 0;
  for (int i = 1; i < 9; ++i) {
    if (std::abs(out(i / 3, i % 3)) > std::abs(out(best / 3, best % 3))) best = i;
  }
  if (out(best / 3, best % 3) < 0.0) out = -out;
  return out;
}

Homography::Homography(const Eigen::Matrix3d& m) : m_(CanonicalizeHomography(m)) {
  if (std::abs(m_.determinant()) < 1e-14) {
    throw Error(ErrorCode::kDegenerateConfiguration, "homography is singular");
  }
}

Eigen::Vector2d Homography::Transfer(const Eigen::Vector2d& x) const {
  const Eigen::Vector3d y = m_ * x.homogeneous();
  if (std::abs(y.z()) < kInfinityTolerance) {
    throw Error(ErrorCode::kPointAtInfinity, "point maps to infinity");
  }
  return y.hnormalized();
}

Intrinsics Intrinsics::FromFocal(double fx, double fy, double cx, double cy) {
  Intrinsics in;
  in.k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return in;
}

void ValidateIntrinsics(const Intrinsics& intrinsics) {
  const Eigen::Matrix3d& k = intrinsics.k;
  if (!k.allFinite() || k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "intrinsics must be upper triangular");
  }
  if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "intrinsics focal entries must be positive");
  }
  if (k(2, 2) != 1.0) throw Error(ErrorCode::kInvalidArgument, "intrinsics k[2][2] must be 1");
}

Homography EstimateHomography(std::span<const Correspondence> matches) {
  return EstimateFromAccessor(matches.size(),
                              [&](size_t i) -> const Correspondence& { return matches[i]; });
}

Homography EstimateHomography(std::span<const Correspondence> matches,
                              std::span<const int> subset) {
  return EstimateFromAccessor(subset.size(), [&](size_t i) -> const Correspondence& {
    return matches[static_cast<size_t>(subset[i])];
  });
}

double TransferResidual(const Homography& h, const Correspondence& c) {
  return (c.x_prime - h.Transfer(c.x)).norm();
}

double TransferResidualOrInf(const Homography& h, const Correspondence& c) noexcept {
  const Eigen::Vector3d y = h.matrix() * c.x.homogeneous();
  if (std::abs(y.z()) < kInfinityTolerance) return std::numeric_limits<double>::infinity();
  return (c.x_prime - y.hnormalized()).norm();
}

double Residual(const Homography& h, const Correspondence& c, ResidualKind kind) {
  const double forward = TransferResidual(h, c);
  if (kind == ResidualKind::kOneWay) return forward;
  const Eigen::Vector3d back = h.matrix().inverse() * c.x_prime.homogeneous();
  if (std::abs(back.z()) < kInfinityTolerance) {
    throw Error(ErrorCode::kPointAtInfinity, "point maps to infinity under inverse");
  }
  return forward + (c.x - back.hnormalized()).norm();
}

Homography ComposeHomography(const PlaneDecomposition& d, const Intrinsics& intrinsics) {
  const Eigen::Matrix3d euclidean =
      d.rotation + d.translation * d.normal.transpose() / d.distance;
  return Homography(intrinsics.k * euclidean * intrinsics.k.inverse());
}

std::vector<PlaneDecomposition> DecomposeHomography(const Homography& h,
                                                    const Intrinsics& intrinsics,
                                                    const DecomposeOptions& options) {
  const Eigen::Matrix3d k_inv = intrinsics.k.inverse();
  Eigen::Matrix3d a = k_inv * h.matrix() * intrinsics.k;
  // Both cameras see the same side of the plane, so 1 + N^t R^t T / D > 0.
  if (a.determinant() < 0.0) a = -a;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  a /= sv(1);
  const double s1 = sv(0) / sv(1);
  const double s3 = sv(2) / sv(1);
  if (s1 - s3 < kPureRotationTolerance) {
    throw Error(ErrorCode::kPureRotation, "homography is a pure rotation; plane unobservable");
  }

  const Eigen::Matrix3d v = svd.matrixV();
  const Eigen::Vector3d v1 = v.col(0);
  const Eigen::Vector3d v2 = v.col(1);
  const Eigen::Vector3d v3 = v.col(2);
  const double denom = std::sqrt(s1 * s1 - s3 * s3);
  const double c1 = std::sqrt(std::max(0.0, 1.0 - s3 * s3)) / denom;
  const double c3 = std::sqrt(std::max(0.0, s1 * s1 - 1.0)) / denom;

  std::vector<PlaneDecomposition> algebraic;
  for (const double sign : {1.0, -1.0}) {
    const Eigen::Vector3d u = c1 * v1 + sign * c3 * v3;
    Eigen::Matrix3d basis;
    basis << v2, u, v2.cross(u);
    const Eigen::Vector3d hv2 = a * v2;
    const Eigen::Vector3d hu = a * u;
    Eigen::Matrix3d image;
    image << hv2, hu, hv2.cross(hu);
    const Eigen::Matrix3d rotation = image * basis.transpose();
    const Eigen::Vector3d normal = v2.cross(u).normalized();
    const Eigen::Vector3d scaled_t = (a - rotation) * normal;
    const double t_norm = scaled_t.norm();
    if (!(t_norm > kPureRotationTolerance)) continue;
    for (const double flip : {1.0, -1.0}) {
      PlaneDecomposition d;
      d.rotation = rotation;
      d.normal = flip * normal;
      d.translation = flip * scaled_t / t_norm;
      d.distance = 1.0 / t_norm;
      algebraic.push_back(d);
    }
  }

  struct Ranked {
    PlaneDecomposition d;
    double score;
    size_t index;
  };
  std::vector<Ranked> ranked;
  for (size_t i = 0; i < algebraic.size(); ++i) {
    const PlaneDecomposition& d = algebraic[i];
    size_t behind = 0;
    for (const Correspondence& c : options.support) {
      const Eigen::Vector3d ray = k_inv * c.x.homogeneous();
      const double facing = d.normal.dot(ray);
      if (!(facing > 0.0)) {
        ++behind;
        continue;
      }
      const Eigen::Vector3d point1 = ray * (d.distance / facing);
      const Eigen::Vector3d point2 = d.rotation * point1 + d.translation;
      if (!(point2.z() > 0.0)) ++behind;
    }
    const double visible_fraction =
        options.support.empty()
            ? 1.0
            : 1.0 - static_cast<double>(behind) / static_cast<double>(options.support.size());
    const bool visible = visible_fraction >= options.min_visible_fraction;
    if (!visible) continue;
    double score = 0.0;
    if (options.motion_prior) {
      score = MotionDistance(d.motion(), *options.motion_prior);
    } else if (!options.support.empty()) {
      const Homography recomposed = ComposeHomography(d, intrinsics);
      for (const Correspondence& c : options.support) {
        score += TransferResidual(recomposed, c);
      }
    }
    ranked.push_back({d, score, i});
  }
  if (ranked.empty()) {
    throw Error(ErrorCode::kDecompositionFailed, "no decomposition candidate passes cheirality");
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& l, const Ranked& r) { return l.score < r.score; });
  std::vector<PlaneDecomposition> out;
  out.reserve(ranked.size());
  for (const Ranked& r : ranked) out.push_back(r.d);
  return out;
}

double AngleBetween(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  // atan2 form stays accurate for nearly parallel vectors.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double MotionDistance(const Motion& a, const Motion& b) {
  const Eigen::Matrix3d delta = a.rotation.transpose() * b.rotation;
  const double cos_angle = std::clamp((delta.trace() - 1.0) / 2.0, -1.0, 1.0);
  double distance = std::acos(cos_angle);
  if (a.translation.norm() > 0.0 && b.translation.norm() > 0.0) {
    distance += AngleBetween(a.translation, b.translation);
  }
  return distance;
}

double RelativeHomographyError(const Homography& a, const Homography& b) {
  return std::min((a.matrix() - b.matrix()).norm(), (a.matrix() + b.matrix()).norm());
}

}  // namespace planemerge
