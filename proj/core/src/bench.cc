#include "planemerge/bench.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Geometry>
#include <fmt/format.h>

#include "planemerge/error.h"

namespace planemerge {
namespace {

ScenePlane Plane(Eigen::Vector3d n, double d, Eigen::Vector3d color) {
  ScenePlane p;
  p.normal = n.normalized();
  p.distance = d;
  p.color = color;
  return p;
}

Motion MakeMotion(double degrees, Eigen::Vector3d axis, Eigen::Vector3d t) {
  Motion m;
  m.rotation = Eigen::AngleAxisd(degrees * M_PI / 180.0, axis.normalized()).toRotationMatrix();
  m.translation = t;
  return m;
}

bool InExtent(const ScenePlane& p, const Eigen::Vector2d& x) {
  return (x.array() >= p.extent_lo.array()).all() && (x.array() <= p.extent_hi.array()).all();
}

// Index of the visible plane and its depth along the ray, or -1.
std::pair<int, double> VisiblePlane(const SceneSpec& spec, const Eigen::Vector2d& pixel,
                                    const Eigen::Vector3d& ray) {
  int best = -1;
  double best_t = spec.convex ? -1.0 : std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < spec.planes.size(); ++k) {
    const ScenePlane& p = spec.planes[k];
    const double facing = p.normal.dot(ray);
    if (spec.convex) {
      if (facing <= 1e-12) return {-1, 0.0};
    } else if (facing <= 1e-12 || !InExtent(p, pixel)) {
      continue;
    }
    const double t = p.distance / facing;
    if (spec.convex ? t > best_t : t < best_t) {
      best = static_cast<int>(k);
      best_t = t;
    }
  }
  if (best >= 0 && spec.convex && !InExtent(spec.planes[static_cast<size_t>(best)], pixel)) {
    return {-1, 0.0};
  }
  return {best, best_t};
}

}  // namespace

void ValidateSceneSpec(const SceneSpec& s) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (s.planes.empty()) fail("scene has no planes");
  for (const auto& p : s.planes) {
    if (!p.normal.allFinite() || std::abs(p.normal.norm() - 1.0) > 1e-6) fail("plane normal must be unit");
    if (!(p.distance > 0.0)) fail("plane distance must be > 0");
    if ((p.color.array() < 0.0).any() || (p.color.array() > 1.0).any()) fail("plane colour outside [0,1]");
  }
  if (s.width < 1 || s.height < 1) fail("image size must be positive");
  if (s.matches_per_plane < 1) fail("matches_per_plane must be >= 1");
  if (!(s.noise_sigma >= 0.0) || !(s.color_sigma >= 0.0)) fail("noise must be >= 0");
  if (!(s.outlier_fraction >= 0.0 && s.outlier_fraction < 1.0)) fail("outlier_fraction must be in [0,1)");
  if (!(s.max_depth > 0.0)) fail("max_depth must be > 0");
  ValidateIntrinsics(s.intrinsics);
}

GeneratedScene GenerateScene(const SceneSpec& spec) {
  ValidateSceneSpec(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> ux(0.0, spec.width), uy(0.0, spec.height);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Matrix3d& k = spec.intrinsics.k;
  const Eigen::Matrix3d k_inv = k.inverse();
  const size_t planes = spec.planes.size();
  const size_t per_plane = static_cast<size_t>(spec.matches_per_plane);

  GeneratedScene out;
  std::vector<size_t> filled(planes, 0);
  size_t missing = planes * per_plane;
  const size_t budget = 4000 * planes * per_plane;
  for (size_t draw = 0; missing > 0 && draw < budget; ++draw) {
    const Eigen::Vector2d x(ux(rng), uy(rng));
    const Eigen::Vector3d ray = k_inv * x.homogeneous();
    const auto [plane, t] = VisiblePlane(spec, x, ray);
    if (plane < 0 || filled[static_cast<size_t>(plane)] >= per_plane) continue;
    const Eigen::Vector3d p1 = t * ray;
    if (p1.z() > spec.max_depth) continue;
    const Eigen::Vector3d p2 = spec.motion.rotation * p1 + spec.motion.translation;
    if (p2.z() <= 1e-9) continue;
    const Eigen::Vector2d x2 = (k * p2).hnormalized();
    if (x2.x() < 0 || x2.y() < 0 || x2.x() > spec.width || x2.y() > spec.height) continue;

    Correspondence c;
    c.id = static_cast<int64_t>(out.matches.size());
    c.x = x;
    c.x_prime = x2;
    c.gt_plane = plane;
    Eigen::Vector3d color = spec.planes[static_cast<size_t>(plane)].color;
    for (int ch = 0; ch < 3; ++ch) color[ch] += spec.color_sigma * gauss(rng);
    c.color_mean = color.cwiseMax(0.0).cwiseMin(1.0);
    out.matches.push_back(c);
    ++filled[static_cast<size_t>(plane)];
    --missing;
  }
  for (size_t p = 0; p < planes; ++p) {
    if (filled[p] < per_plane) {
      throw Error(ErrorCode::kPlaneNotVisible,
                  fmt::format("plane {} received {} of {} points", p, filled[p], per_plane));
    }
  }

  for (auto& c : out.matches) {
    if (spec.noise_sigma > 0.0) c.x_prime += spec.noise_sigma * Eigen::Vector2d(gauss(rng), gauss(rng));
  }
  const size_t outliers = static_cast<size_t>(
      std::lround(spec.outlier_fraction * static_cast<double>(out.matches.size())));
  std::vector<size_t> order(out.matches.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (size_t q = 0; q < outliers; ++q) {
    Correspondence& c = out.matches[order[q]];
    c.x_prime = {ux(rng), uy(rng)};
    c.gt_plane = kOutlier;
  }

  for (const auto& p : spec.planes) {
    const Eigen::Matrix3d h = k * (spec.motion.rotation +
                                   spec.motion.translation * p.normal.transpose() / p.distance) *
                              k_inv;
    out.homographies.emplace_back(h);
    out.normals.push_back(p.normal);
  }
  return out;
}

std::vector<std::string> PresetNames() { return {"corner", "box", "corridor", "lab"}; }

SceneSpec Preset(std::string_view name, uint64_t seed) {
  SceneSpec s;
  s.name = std::string(name);
  s.seed = seed;
  const Eigen::Vector3d red(0.8, 0.3, 0.3), green(0.3, 0.7, 0.35), blue(0.3, 0.35, 0.8),
      sand(0.75, 0.65, 0.4);
  if (name == "corner") {
    // Inside corner of a room: two walls meeting 3 m ahead, floor below.
    s.planes = {Plane({-1, 0, 1}, 3.0 / std::sqrt(2.0), red),
                Plane({1, 0, 1}, 3.0 / std::sqrt(2.0), green), Plane({0, 1, 0}, 0.6, blue)};
    s.motion = MakeMotion(3.0, {0.1, 1.0, 0.05}, {0.15, 0.03, 0.05});
  } else if (name == "box") {
    // Outside corner of a box below eye level: top face and two sides.
    const Eigen::Vector3d corner(0.0, 0.55, 1.6);
    const Eigen::Vector3d n_top(0, 1, 0), n_left = Eigen::Vector3d(1, 0, 1).normalized(),
                          n_right = Eigen::Vector3d(-1, 0, 1).normalized();
    s.planes = {Plane(n_top, n_top.dot(corner), sand), Plane(n_left, n_left.dot(corner), red),
                Plane(n_right, n_right.dot(corner), blue)};
    s.convex = true;
    s.max_depth = 2.6;
    s.motion = MakeMotion(3.0, {0.2, 1.0, 0.1}, {0.15, -0.03, 0.04});
  } else if (name == "corridor") {
    s.planes = {Plane({-1, 0, 0}, 1.0, red), Plane({1, 0, 0}, 1.0, green),
                Plane({0, 1, 0}, 1.2, blue), Plane({0, -1, 0}, 1.3, sand)};
    s.max_depth = 8.0;
    s.motion = MakeMotion(2.0, {0.0, 1.0, 0.1}, {0.08, 0.02, 0.15});
  } else if (name == "lab") {
    // Room corner with a table in front of the camera.
    s.planes = {Plane({-1, 0, 1}, 3.5 / std::sqrt(2.0), red),
                Plane({1, 0, 1}, 3.5 / std::sqrt(2.0), green), Plane({0, 1, 0}, 0.9, blue),
                Plane({0, 1, 0}, 0.45, sand)};
    s.planes[3].extent_lo = {200, 360};
    s.planes[3].extent_hi = {440, 480};
    s.motion = MakeMotion(4.0, {0.1, 1.0, 0.0}, {0.18, 0.02, 0.05});
  } else {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown preset '{}'", name));
  }
  return s;
}

std::vector<int> MaxWeightAssignment(const Eigen::MatrixXd& weight) {
  // Hungarian method with potentials on the square padded cost matrix.
  const int rows = static_cast<int>(weight.rows()), cols = static_cast<int>(weight.cols());
  const int n = std::max(rows, cols);
  if (n == 0) return {};
  const double top = weight.size() ? weight.maxCoeff() : 0.0;
  auto cost = [&](int i, int j) {
    return (i < rows && j < cols) ? top - weight(i, j) : top;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(static_cast<size_t>(rows), -1);
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<size_t>(j)] - 1;
    if (i >= 0 && i < rows && j - 1 < cols) assign[static_cast<size_t>(i)] = j - 1;
  }
  return assign;
}

namespace {

int LabelCount(std::span<const int> labels) {
  int m = -1;
  for (int l : labels) m = std::max(m, l);
  return m + 1;
}

void CheckLengths(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("labelings differ in length ({} vs {})", a.size(), b.size()));
  }
}

}  // namespace

double ClassificationError(std::span<const int> predicted, std::span<const int> truth) {
  CheckLengths(predicted, truth);
  const int pd = LabelCount(predicted), sp = LabelCount(truth);
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(pd, sp);
  size_t total = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0) continue;
    ++total;
    if (predicted[i] >= 0) overlap(predicted[i], truth[i]) += 1.0;
  }
  if (total == 0) return 0.0;
  double correct = 0.0;
  const auto assign = MaxWeightAssignment(overlap);
  for (int d = 0; d < pd; ++d) {
    if (assign[static_cast<size_t>(d)] >= 0) correct += overlap(d, assign[static_cast<size_t>(d)]);
  }
  return 100.0 * (static_cast<double>(total) - correct) / static_cast<double>(total);
}

PsAdTables ComputePsAd(std::span<const int> predicted, std::span<const int> truth) {
  CheckLengths(predicted, truth);
  const int pd = LabelCount(predicted), sp = LabelCount(truth);
  Eigen::MatrixXd count = Eigen::MatrixXd::Zero(sp, pd);
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= 0 && predicted[i] >= 0) count(truth[i], predicted[i]) += 1.0;
  }
  PsAdTables t;
  t.ps = Eigen::MatrixXd::Zero(sp, pd);
  t.ad = Eigen::MatrixXd::Zero(sp, pd);
  for (int d = 0; d < pd; ++d) {
    const double col = count.col(d).sum();
    if (col > 0) t.ps.col(d) = 100.0 * count.col(d) / col;
  }
  for (int s = 0; s < sp; ++s) {
    const double row = count.row(s).sum();
    if (row > 0) t.ad.row(s) = 100.0 * count.row(s) / row;
  }
  return t;
}

EvalReport Evaluate(std::span<const int> predicted, std::span<const int> truth) {
  EvalReport r;
  r.error_percent = ClassificationError(predicted, truth);
  r.detected_planes = LabelCount(predicted);
  r.truth_planes = LabelCount(truth);
  r.tables = ComputePsAd(predicted, truth);
  return r;
}

std::vector<int> TruthLabels(std::span<const Correspondence> matches) {
  std::vector<int> out;
  out.reserve(matches.size());
  for (const auto& c : matches) out.push_back(c.gt_plane.value_or(kOutlier) < 0 ? kOutlier : *c.gt_plane);
  return out;
}

std::string Roman(int n) {
  static const std::pair<int, const char*> table[] = {{1000, "M"}, {900, "CM"}, {500, "D"},
                                                      {400, "CD"}, {100, "C"},  {90, "XC"},
                                                      {50, "L"},   {40, "XL"},  {10, "X"},
                                                      {9, "IX"},   {5, "V"},    {4, "IV"},
                                                      {1, "I"}};
  std::string out;
  for (const auto& [value, glyph] : table) {
    while (n >= value) {
      out += glyph;
      n -= value;
    }
  }
  return out;
}

std::string RenderEvalReport(const EvalReport& r) {
  std::string out = fmt::format("error(%)  {:.2f}\nplanes detected  {}\nscene planes  {}\n",
                                r.error_percent, r.detected_planes, r.truth_planes);
  auto table = [&](const char* title, const Eigen::MatrixXd& m) {
    out += fmt::format("\n{:<8}", title);
    for (Eigen::Index d = 0; d < m.cols(); ++d) out += fmt::format("{:>9}", "PD " + Roman(static_cast<int>(d) + 1));
    out += '\n';
    for (Eigen::Index s = 0; s < m.rows(); ++s) {
      out += fmt::format("{:<8}", "SP " + Roman(static_cast<int>(s) + 1));
      for (Eigen::Index d = 0; d < m.cols(); ++d) out += fmt::format("{:>9.2f}", m(s, d));
      out += '\n';
    }
  };
  table("PS", r.tables.ps);
  table("AD", r.tables.ad);
  return out;
}

}  // namespace planemerge
