#include "planemerge/io.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <type_traits>
#include <unordered_map>
#include <utility>

#include <Eigen/Geometry>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "planemerge/error.h"
#include "planemerge/refinement.h"

namespace planemerge {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

constexpr std::string_view kMatchMagic = "planemerge-matches";
constexpr std::string_view kLabelingFormat = "planemerge-labeling";

// ---- match files ----------------------------------------------------------

[[noreturn]] void LineError(size_t line, const std::string& msg) {
  throw Error(ErrorCode::kParseError, fmt::format("line {}: {}", line, msg));
}

std::vector<std::string_view> Tokens(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double ToDouble(std::string_view tok, size_t line, std::string_view what) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || end != tok.data() + tok.size()) {
    LineError(line, fmt::format("{} '{}' is not a number", what, tok));
  }
  if (!std::isfinite(v)) LineError(line, fmt::format("{} '{}' is not finite", what, tok));
  return v;
}

template <typename Int>
Int ToInt(std::string_view tok, size_t line, std::string_view what) {
  Int v{};
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  const auto [end, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || end != tok.data() + tok.size()) {
    LineError(line, fmt::format("{} '{}' is not an integer", what, tok));
  }
  return v;
}

bool StartsRecord(std::string_view tok) {
  const char c = tok.front();
  return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+';
}

// ---- strict JSON reading --------------------------------------------------

[[noreturn]] void KeyError(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::kParseError, fmt::format("{}: {}", path.empty() ? "<document>" : path, msg));
}

std::string Join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

Json ParseJson(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParseError, fmt::format("invalid JSON at byte {}", e.byte));
  }
}

void Read(const Json& j, const std::string& path, double& out) {
  if (!j.is_number()) KeyError(path, "expected a number");
  out = j.get<double>();
  if (!std::isfinite(out)) KeyError(path, "expected a finite number");
}

void Read(const Json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) KeyError(path, "expected true or false");
  out = j.get<bool>();
}

void Read(const Json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) KeyError(path, "expected a string");
  out = j.get<std::string>();
}

template <typename Int>
  requires std::is_integral_v<Int>
void Read(const Json& j, const std::string& path, Int& out) {
  if (!j.is_number_integer()) KeyError(path, "expected an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (!j.is_number_unsigned()) KeyError(path, "expected a non-negative integer");
    const auto v = j.get<uint64_t>();
    if (v > std::numeric_limits<Int>::max()) KeyError(path, "integer out of range");
    out = static_cast<Int>(v);
  } else {
    const auto v = j.get<int64_t>();
    if (v < std::numeric_limits<Int>::min() || v > std::numeric_limits<Int>::max()) {
      KeyError(path, "integer out of range");
    }
    out = static_cast<Int>(v);
  }
}

void Read(const Json& j, const std::string& path, std::vector<double>& out) {
  if (!j.is_array()) KeyError(path, "expected an array of numbers");
  out.assign(j.size(), 0.0);
  for (size_t i = 0; i < j.size(); ++i) Read(j[i], fmt::format("{}[{}]", path, i), out[i]);
}

template <int N>
void Read(const Json& j, const std::string& path, Eigen::Matrix<double, N, 1>& out) {
  std::vector<double> v;
  Read(j, path, v);
  if (v.size() != static_cast<size_t>(N)) KeyError(path, fmt::format("expected {} numbers", N));
  for (int i = 0; i < N; ++i) out[i] = v[static_cast<size_t>(i)];
}

void Read(const Json& j, const std::string& path, Eigen::Matrix3d& out) {
  std::vector<double> v;
  Read(j, path, v);
  if (v.size() != 9) KeyError(path, "expected 9 numbers, row-major");
  for (int i = 0; i < 9; ++i) out(i / 3, i % 3) = v[static_cast<size_t>(i)];
}

// Reads keys of one JSON object; Finish() rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) KeyError(path_, "expected an object");
  }

  template <typename T>
  bool Get(std::string_view key, T& out) {
    const Json* v = Find(key);
    if (v) Read(*v, Join(path_, key), out);
    return v != nullptr;
  }

  template <typename Fn>
  void Object(std::string_view key, Fn&& fn) {
    if (const Json* v = Find(key)) {
      ObjectReader child(*v, Join(path_, key));
      fn(child);
      child.Finish();
    }
  }

  const Json* Find(std::string_view key) {
    const auto it = j_.find(std::string(key));
    if (it == j_.end()) return nullptr;
    seen_.insert(std::string(key));
    return &*it;
  }

  const std::string& path() const { return path_; }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) KeyError(Join(path_, key), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* ModeName(PairwiseMode mode) {
  switch (mode) {
    case PairwiseMode::kGated: return "gated";
    case PairwiseMode::kContrastSensitive: return "contrast_sensitive";
    case PairwiseMode::kLiteral: return "literal";
  }
  return "contrast_sensitive";
}

OrderedJson MatrixJson(const Eigen::Matrix3d& m) {
  OrderedJson a = OrderedJson::array();
  for (int i = 0; i < 9; ++i) a.push_back(m(i / 3, i % 3));
  return a;
}

OrderedJson VectorJson(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }

OrderedJson LabelPairs(std::span<const Correspondence> matches, std::span<const int> labels) {
  OrderedJson a = OrderedJson::array();
  for (size_t i = 0; i < matches.size(); ++i) a.push_back({matches[i].id, labels[i]});
  return a;
}

int OutlierCount(const PatchLabeling& l) { return static_cast<int>(l.size() - l.InlierCount()); }

OrderedJson MotionJson(const Motion& m) {
  return {{"rotation", MatrixJson(m.rotation)}, {"translation", VectorJson(m.translation)}};
}

}  // namespace

MatchFile ParseMatchFile(std::istream& in) {
  MatchFile file;
  std::string raw;
  size_t line = 0;
  bool header = false;
  bool fields_seen = false;
  std::unordered_map<int64_t, size_t> id_line;
  size_t trailing_lines = 0;
  constexpr size_t kListedWarnings = 5;

  while (std::getline(in, raw)) {
    ++line;
    const auto tok = Tokens(raw);
    if (tok.empty() || tok[0].front() == '#') continue;
    if (!header) {
      if (tok[0] != kMatchMagic) {
        LineError(line, fmt::format("expected header '{} {}'", kMatchMagic, kMatchFileVersion));
      }
      if (tok.size() != 2) LineError(line, "header must be '<magic> <version>'");
      const int version = ToInt<int>(tok[1], line, "version");
      if (version != kMatchFileVersion) {
        LineError(line, fmt::format("unsupported match file version {}; this reader understands version {}",
                                    version, kMatchFileVersion));
      }
      header = true;
      continue;
    }
    if (!StartsRecord(tok[0])) {
      if (!file.matches.empty()) LineError(line, fmt::format("header line '{}' after the first record", tok[0]));
      if (tok[0] == "intrinsics") {
        if (file.intrinsics) LineError(line, "repeated intrinsics line");
        if (tok.size() != 10) LineError(line, "intrinsics needs 9 numbers, row-major");
        Intrinsics k;
        for (int i = 0; i < 9; ++i) k.k(i / 3, i % 3) = ToDouble(tok[static_cast<size_t>(i) + 1], line, "intrinsics entry");
        try {
          ValidateIntrinsics(k);
        } catch (const Error& e) {
          LineError(line, e.what());
        }
        file.intrinsics = k;
      } else if (tok[0] == "image") {
        if (file.image_size) LineError(line, "repeated image line");
        if (tok.size() != 3) LineError(line, "image needs <width> <height>");
        const int w = ToInt<int>(tok[1], line, "width");
        const int h = ToInt<int>(tok[2], line, "height");
        if (w < 1 || h < 1) LineError(line, "image size must be positive");
        file.image_size = Eigen::Vector2i(w, h);
      } else if (tok[0] == "fields") {
        if (fields_seen) LineError(line, "repeated fields line");
        fields_seen = true;
        for (size_t i = 1; i < tok.size(); ++i) {
          if (tok[i] == "color" && !file.has_color && !file.has_gt) {
            file.has_color = true;
          } else if (tok[i] == "gt" && !file.has_gt) {
            file.has_gt = true;
          } else {
            LineError(line, fmt::format("fields: unexpected '{}' (allowed: color, gt, in that order)", tok[i]));
          }
        }
      } else {
        LineError(line, fmt::format("unknown header keyword '{}'", tok[0]));
      }
      continue;
    }

    const size_t needed = 5 + (file.has_color ? 3 : 0) + (file.has_gt ? 1 : 0);
    if (tok.size() < needed) {
      LineError(line, fmt::format("expected {} fields, found {}", needed, tok.size()));
    }
    Correspondence c;
    c.id = ToInt<int64_t>(tok[0], line, "id");
    if (const auto [it, fresh] = id_line.emplace(c.id, line); !fresh) {
      LineError(line, fmt::format("duplicate id {} (first on line {})", c.id, it->second));
    }
    c.x = {ToDouble(tok[1], line, "x1"), ToDouble(tok[2], line, "y1")};
    c.x_prime = {ToDouble(tok[3], line, "x2"), ToDouble(tok[4], line, "y2")};
    size_t next = 5;
    if (file.has_color) {
      Eigen::Vector3d rgb;
      for (int ch = 0; ch < 3; ++ch) {
        rgb[ch] = ToDouble(tok[next++], line, "colour");
        if (rgb[ch] < 0.0 || rgb[ch] > 1.0) LineError(line, "colour channel outside [0,1]");
      }
      c.color_mean = rgb;
    }
    if (file.has_gt) {
      const int gt = ToInt<int>(tok[next++], line, "gt label");
      if (gt < kOutlier) LineError(line, fmt::format("gt label {} below {}", gt, kOutlier));
      c.gt_plane = gt;
    }
    if (tok.size() > needed) {
      if (++trailing_lines <= kListedWarnings) {
        file.warnings.push_back(
            fmt::format("line {}: ignoring {} unknown trailing field(s)", line, tok.size() - needed));
      }
    }
    file.matches.push_back(std::move(c));
  }
  if (!header) {
    LineError(std::max<size_t>(line, 1),
              fmt::format("empty file, expected header '{} {}'", kMatchMagic, kMatchFileVersion));
  }
  if (trailing_lines > kListedWarnings) {
    file.warnings.push_back(fmt::format("{} more line(s) with unknown trailing fields",
                                        trailing_lines - kListedWarnings));
  }
  return file;
}

MatchFile ReadMatchFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, fmt::format("cannot read '{}'", path.string()));
  try {
    return ParseMatchFile(in);
  } catch (const Error& e) {
    std::string_view msg = e.what();
    msg.remove_prefix(std::string_view(ErrorCodeName(e.code())).size() + 2);
    throw Error(e.code(), fmt::format("{}: {}", path.string(), msg));
  }
}

void WriteMatchFile(std::ostream& out, const MatchFile& file) {
  for (const auto& c : file.matches) {
    if (file.has_color && !c.color_mean) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("match {} has no colour", c.id));
    }
    if (file.has_gt && !c.gt_plane) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("match {} has no gt label", c.id));
    }
  }
  out << kMatchMagic << ' ' << kMatchFileVersion << '\n';
  if (file.intrinsics) {
    out << "intrinsics";
    for (int i = 0; i < 9; ++i) out << fmt::format(" {}", file.intrinsics->k(i / 3, i % 3));
    out << '\n';
  }
  if (file.image_size) out << fmt::format("image {} {}\n", file.image_size->x(), file.image_size->y());
  out << "fields" << (file.has_color ? " color" : "") << (file.has_gt ? " gt" : "") << '\n';
  for (const auto& c : file.matches) {
    out << fmt::format("{} {} {} {} {}", c.id, c.x.x(), c.x.y(), c.x_prime.x(), c.x_prime.y());
    if (file.has_color) {
      out << fmt::format(" {} {} {}", c.color_mean->x(), c.color_mean->y(), c.color_mean->z());
    }
    if (file.has_gt) out << ' ' << *c.gt_plane;
    out << '\n';
  }
}

MatchFile MatchFileFromScene(const SceneSpec& spec, const GeneratedScene& scene) {
  MatchFile f;
  f.intrinsics = spec.intrinsics;
  f.image_size = Eigen::Vector2i(spec.width, spec.height);
  f.has_color = true;
  f.has_gt = true;
  f.matches = scene.matches;
  return f;
}

PipelineConfig ParseRunConfig(std::string_view text) {
  const Json root = ParseJson(text);
  PipelineConfig cfg;
  ObjectReader r(root, "");
  r.Get("seed", cfg.seed);
  r.Object("sampling", [&](ObjectReader& s) {
    s.Get("m", cfg.sampling.m);
    s.Get("neighborhood_k", cfg.sampling.neighborhood_k);
    s.Get("minimal_sample", cfg.sampling.minimal_sample);
    s.Get("sigma_spatial", cfg.sampling.sigma_spatial);
    s.Get("max_retries", cfg.sampling.max_retries);
  });
  r.Object("ork", [&](ObjectReader& s) {
    s.Get("step", cfg.ork.step);
    s.Get("z", cfg.ork.z);
  });
  r.Object("cluster", [&](ObjectReader& s) {
    s.Get("max_planes", cfg.cluster.max_planes);
    s.Get("outlier_threshold", cfg.cluster.outlier_threshold);
    s.Get("single_structure_cutoff", cfg.cluster.single_structure_cutoff);
    s.Get("oversegmentation", cfg.cluster.oversegmentation);
    s.Get("kmeans_restarts", cfg.cluster.kmeans_restarts);
  });
  r.Get("cut_factor", cfg.cut_factor);
  r.Get("min_patch_size", cfg.min_patch_size);
  r.Object("local_patch", [&](ObjectReader& s) { s.Get("k", cfg.local_patch.k); });
  r.Object("mrf", [&](ObjectReader& s) {
    s.Object("weights", [&](ObjectReader& w) {
      w.Get("lambda1", cfg.mrf.weights.lambda1);
      w.Get("lambda2", cfg.mrf.weights.lambda2);
      w.Get("lambda3", cfg.mrf.weights.lambda3);
    });
    std::string mode;
    if (s.Get("mode", mode)) {
      if (mode == "gated") {
        cfg.mrf.mode = PairwiseMode::kGated;
      } else if (mode == "contrast_sensitive") {
        cfg.mrf.mode = PairwiseMode::kContrastSensitive;
      } else if (mode == "literal") {
        cfg.mrf.mode = PairwiseMode::kLiteral;
      } else {
        KeyError("mrf.mode", fmt::format("'{}' is not one of gated, contrast_sensitive, literal", mode));
      }
    }
    s.Object("texture", [&](ObjectReader& t) { t.Get("window", cfg.mrf.texture.window); });
  });
  r.Object("solver", [&](ObjectReader& s) {
    s.Get("max_iters", cfg.solver.max_iters);
    s.Get("tol", cfg.solver.tol);
  });
  r.Get("use_mrf", cfg.use_mrf);
  r.Get("mrf_rounds", cfg.mrf_rounds);
  r.Get("motion_consensus", cfg.motion_consensus);
  r.Finish();
  ValidatePipelineConfig(cfg);
  return cfg;
}

std::string RunConfigJson(const PipelineConfig& cfg) {
  OrderedJson j;
  j["seed"] = cfg.seed;
  j["sampling"] = {{"m", cfg.sampling.m},
                   {"neighborhood_k", cfg.sampling.neighborhood_k},
                   {"minimal_sample", cfg.sampling.minimal_sample},
                   {"sigma_spatial", cfg.sampling.sigma_spatial},
                   {"max_retries", cfg.sampling.max_retries}};
  j["ork"] = {{"step", cfg.ork.step}, {"z", cfg.ork.z}};
  j["cluster"] = {{"max_planes", cfg.cluster.max_planes},
                  {"outlier_threshold", cfg.cluster.outlier_threshold},
                  {"single_structure_cutoff", cfg.cluster.single_structure_cutoff},
                  {"oversegmentation", cfg.cluster.oversegmentation},
                  {"kmeans_restarts", cfg.cluster.kmeans_restarts}};
  j["cut_factor"] = cfg.cut_factor;
  j["min_patch_size"] = cfg.min_patch_size;
  j["local_patch"] = {{"k", cfg.local_patch.k}};
  j["mrf"] = {{"weights",
               {{"lambda1", cfg.mrf.weights.lambda1},
                {"lambda2", cfg.mrf.weights.lambda2},
                {"lambda3", cfg.mrf.weights.lambda3}}},
              {"mode", ModeName(cfg.mrf.mode)},
              {"texture", {{"window", cfg.mrf.texture.window}}}};
  j["solver"] = {{"max_iters", cfg.solver.max_iters}, {"tol", cfg.solver.tol}};
  j["use_mrf"] = cfg.use_mrf;
  j["mrf_rounds"] = cfg.mrf_rounds;
  j["motion_consensus"] = cfg.motion_consensus;
  return j.dump(2) + "\n";
}

SceneSpec ParseSceneSpec(std::string_view text) {
  const Json root = ParseJson(text);
  ObjectReader r(root, "");
  SceneSpec spec;
  std::string base;
  if (r.Get("base", base)) {
    try {
      spec = Preset(base);
    } catch (const Error&) {
      KeyError("base", fmt::format("unknown preset '{}'", base));
    }
  }
  r.Get("name", spec.name);
  if (const Json* planes = r.Find("planes")) {
    if (!planes->is_array()) KeyError("planes", "expected an array");
    spec.planes.clear();
    for (size_t i = 0; i < planes->size(); ++i) {
      ObjectReader p((*planes)[i], fmt::format("planes[{}]", i));
      ScenePlane plane;
      if (!p.Get("normal", plane.normal)) KeyError(p.path(), "missing normal");
      if (!(plane.normal.norm() > 0.0)) KeyError(Join(p.path(), "normal"), "must be nonzero");
      plane.normal.normalize();
      if (!p.Get("distance", plane.distance)) KeyError(p.path(), "missing distance");
      p.Get("color", plane.color);
      p.Get("extent_lo", plane.extent_lo);
      p.Get("extent_hi", plane.extent_hi);
      p.Finish();
      spec.planes.push_back(plane);
    }
  }
  r.Object("motion", [&](ObjectReader& m) {
    Eigen::Vector3d axis = Eigen::Vector3d::UnitY();
    double degrees = 0.0;
    const bool has_axis = m.Get("rotation_axis", axis);
    const bool has_angle = m.Get("rotation_deg", degrees);
    if (has_axis || has_angle) {
      if (!(axis.norm() > 0.0)) KeyError("motion.rotation_axis", "must be nonzero");
      spec.motion.rotation =
          Eigen::AngleAxisd(degrees * std::numbers::pi / 180.0, axis.normalized()).toRotationMatrix();
    }
    m.Get("translation", spec.motion.translation);
  });
  Eigen::Matrix3d k = spec.intrinsics.k;
  if (r.Get("intrinsics", k)) spec.intrinsics.k = k;
  r.Get("width", spec.width);
  r.Get("height", spec.height);
  r.Get("max_depth", spec.max_depth);
  r.Get("convex", spec.convex);
  r.Get("matches_per_plane", spec.matches_per_plane);
  r.Get("noise_sigma", spec.noise_sigma);
  r.Get("color_sigma", spec.color_sigma);
  r.Get("outlier_fraction", spec.outlier_fraction);
  r.Get("seed", spec.seed);
  r.Finish();
  ValidateSceneSpec(spec);
  return spec;
}

std::string LabelingJson(std::span<const Correspondence> matches, const PatchLabeling& labeling,
                         const PipelineResult* diagnostics) {
  if (labeling.size() != matches.size()) {
    throw Error(ErrorCode::kInvalidArgument, "labeling and matches differ in length");
  }
  OrderedJson j;
  j["format"] = kLabelingFormat;
  j["version"] = kLabelingVersion;
  j["patch_count"] = labeling.patch_count;
  j["labels"] = LabelPairs(matches, labeling.labels);
  if (diagnostics) j["diagnostics"] = OrderedJson::parse(DiagnosticsJson(*diagnostics));
  return j.dump(2) + "\n";
}

LabelingDocument ParseLabeling(std::string_view text) {
  const Json root = ParseJson(text);
  ObjectReader r(root, "");
  std::string format;
  if (!r.Get("format", format) || format != kLabelingFormat) {
    KeyError("format", fmt::format("expected \"{}\"", kLabelingFormat));
  }
  int version = 0;
  if (!r.Get("version", version)) KeyError("version", "missing");
  if (version != kLabelingVersion) {
    KeyError("version", fmt::format("unsupported labeling version {}; this reader understands version {}",
                                    version, kLabelingVersion));
  }
  int patch_count = 0;
  r.Get("patch_count", patch_count);
  r.Find("diagnostics");  // informational only
  const Json* labels = r.Find("labels");
  if (!labels || !labels->is_array()) KeyError("labels", "expected an array of [id, label] pairs");
  r.Finish();

  LabelingDocument doc;
  std::set<int64_t> seen;
  for (size_t i = 0; i < labels->size(); ++i) {
    const Json& e = (*labels)[i];
    const std::string path = fmt::format("labels[{}]", i);
    if (!e.is_array() || e.size() != 2) KeyError(path, "expected [id, label]");
    int64_t id = 0;
    int label = 0;
    Read(e[0], path + "[0]", id);
    Read(e[1], path + "[1]", label);
    if (label < kOutlier) KeyError(path, fmt::format("label {} below {}", label, kOutlier));
    if (!seen.insert(id).second) KeyError(path, fmt::format("duplicate id {}", id));
    doc.ids.push_back(id);
    doc.labels.push_back(label);
  }
  return doc;
}

std::vector<int> AlignLabels(const LabelingDocument& doc, std::span<const Correspondence> matches) {
  if (doc.ids.size() != matches.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("labeling has {} entries for {} matches", doc.ids.size(), matches.size()));
  }
  std::unordered_map<int64_t, int> by_id;
  for (size_t i = 0; i < doc.ids.size(); ++i) by_id.emplace(doc.ids[i], doc.labels[i]);
  std::vector<int> out;
  out.reserve(matches.size());
  for (const auto& c : matches) {
    const auto it = by_id.find(c.id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("match id {} missing from labeling", c.id));
    }
    out.push_back(it->second);
  }
  return out;
}

std::string DiagnosticsJson(const PipelineResult& r) {
  OrderedJson stages;
  stages["sampling"] = {{"hypotheses", r.hypotheses}};
  stages["initial_patches"] = {{"patches", r.initial_patches.patch_count},
                               {"outliers", OutlierCount(r.initial_patches)},
                               {"clusters_requested", r.clusters_requested},
                               {"outlier_threshold", r.outlier_threshold}};
  stages["refinement"] = {{"patches", r.refined_patches.patch_count},
                          {"outliers", OutlierCount(r.refined_patches)},
                          {"cut_threshold", r.cut_threshold}};
  stages["plane_models"] = {{"patches", r.plane_models.size()},
                            {"valid_patches", r.valid_patches},
                            {"consensus_motion", r.motion.has_value()}};
  if (r.solve) {
    stages["mrf"] = {{"nodes", r.mrf_nodes},
                     {"edges", r.mrf_edges},
                     {"labels", r.mrf_labels},
                     {"rounds", r.mrf_rounds_run},
                     {"initial_energy", r.initial_energy},
                     {"final_energy", r.solve->energy},
                     {"iterations", r.solve->iterations},
                     {"converged", r.solve->converged},
                     {"lower_bounds", r.solve->lower_bounds}};
  }
  stages["final"] = {{"patches", r.final_labeling.patch_count},
                     {"outliers", OutlierCount(r.final_labeling)}};
  OrderedJson timings = OrderedJson::object();
  for (const auto& t : r.timings) timings[t.stage] = t.seconds;
  OrderedJson j;
  j["matches"] = r.final_labeling.size();
  j["stages"] = std::move(stages);
  j["timings_s"] = std::move(timings);
  if (r.eval) {
    j["eval"] = {{"error_percent", r.eval->error_percent},
                 {"detected_planes", r.eval->detected_planes},
                 {"truth_planes", r.eval->truth_planes}};
  }
  return j.dump(2) + "\n";
}

std::vector<std::string> StageNames() {
  return {"sampling", "initial_patches", "refinement", "plane_models", "mrf"};
}

std::string StageJson(const PipelineResult& r, std::span<const Correspondence> matches,
                      std::string_view stage) {
  OrderedJson j;
  j["stage"] = stage;
  if (stage == "sampling") {
    OrderedJson hyps = OrderedJson::array();
    for (const auto& h : r.sampled) {
      hyps.push_back({{"h", MatrixJson(h.h.matrix())}, {"source_ids", h.source_ids}});
    }
    j["hypotheses"] = std::move(hyps);
  } else if (stage == "initial_patches") {
    j["outlier_threshold"] = r.outlier_threshold;
    j["clusters_requested"] = r.clusters_requested;
    j["patch_count"] = r.initial_patches.patch_count;
    j["labels"] = LabelPairs(matches, r.initial_patches.labels);
  } else if (stage == "refinement") {
    j["cut_threshold"] = r.cut_threshold;
    j["patch_count"] = r.refined_patches.patch_count;
    j["labels"] = LabelPairs(matches, r.refined_patches.labels);
  } else if (stage == "plane_models") {
    if (r.motion) j["motion"] = MotionJson(*r.motion);
    OrderedJson patches = OrderedJson::array();
    for (const auto& p : r.plane_models) {
      OrderedJson e = {{"id", p.id}, {"members", p.members.size()}, {"valid", p.valid},
                       {"h", MatrixJson(p.h.matrix())}};
      if (p.plane) {
        e["normal"] = VectorJson(p.plane->normal);
        e["distance"] = p.plane->distance;
      }
      patches.push_back(std::move(e));
    }
    j["patches"] = std::move(patches);
    OrderedJson normals = OrderedJson::array();
    for (size_t i = 0; i < r.local_normals.size() && i < matches.size(); ++i) {
      const auto& n = r.local_normals[i].normal;
      normals.push_back({matches[i].id, n ? VectorJson(*n) : OrderedJson(nullptr)});
    }
    j["local_normals"] = std::move(normals);
  } else if (stage == "mrf") {
    if (!r.solve) throw Error(ErrorCode::kInvalidArgument, "the mrf stage did not run");
    j["nodes"] = r.mrf_nodes;
    j["edges"] = r.mrf_edges;
    j["label_count"] = r.mrf_labels;
    j["rounds"] = r.mrf_rounds_run;
    j["initial_energy"] = r.initial_energy;
    j["energy"] = r.solve->energy;
    j["lower_bounds"] = r.solve->lower_bounds;
    j["patch_count"] = r.final_labeling.patch_count;
    j["labels"] = LabelPairs(matches, r.final_labeling.labels);
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("unknown stage '{}' (sampling, initial_patches, refinement, plane_models, mrf)",
                            stage));
  }
  return j.dump(2) + "\n";
}

std::string LabelColor(int label) {
  static constexpr std::string_view kPalette[] = {
      "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
      "#e377c2", "#17becf", "#bcbd22", "#393b79", "#637939", "#843c39",
  };
  constexpr int kFixed = static_cast<int>(std::size(kPalette));
  if (label < 0) return std::string(kOutlierColor);
  if (label < kFixed) return std::string(kPalette[label]);
  // Golden-angle hue walk, saturated enough to never read as gray.
  const double hue = std::fmod((label - kFixed) * 137.50776405, 360.0) / 60.0;
  const double s = 0.7, v = 0.85, c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
  double rgb[3] = {0, 0, 0};
  const int sector = static_cast<int>(hue) % 6;
  // Channels taking c and x in each 60 degree sector.
  static constexpr int kOrder[6][2] = {{0, 1}, {1, 0}, {1, 2}, {2, 1}, {2, 0}, {0, 2}};
  rgb[kOrder[sector][0]] = c;
  rgb[kOrder[sector][1]] = x;
  auto to_byte = [&](double ch) { return static_cast<int>(std::lround((ch + v - c) * 255.0)); };
  return fmt::format("#{:02x}{:02x}{:02x}", to_byte(rgb[0]), to_byte(rgb[1]), to_byte(rgb[2]));
}

std::string RenderSvg(std::span<const Correspondence> matches, std::span<const int> labels,
                      std::optional<Eigen::Vector2i> size) {
  if (labels.size() != matches.size()) {
    throw Error(ErrorCode::kInvalidArgument, "labels and matches differ in length");
  }
  Eigen::Vector2d lo(0, 0), hi(100, 100);
  if (size) {
    hi = size->cast<double>();
  } else if (!matches.empty()) {
    lo = hi = matches[0].x;
    for (const auto& c : matches) {
      lo = lo.cwiseMin(c.x);
      hi = hi.cwiseMax(c.x);
    }
    lo.array() -= 10.0;
    hi.array() += 10.0;
  }
  const Eigen::Vector2d extent = hi - lo;

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"{:.2f} {:.2f} "
      "{:.2f} {:.2f}\">\n",
      extent.x(), extent.y(), lo.x(), lo.y(), extent.x(), extent.y());
  out << fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"white\"/>\n",
                     lo.x(), lo.y(), extent.x(), extent.y());

  MatchGraph graph;
  if (matches.size() >= 3) {
    try {
      graph = DelaunayTriangulate(matches);
    } catch (const Error&) {
      graph = {};
    }
  }
  out << "<g stroke-width=\"1\">\n";
  for (const auto& [a, b] : graph.edges) {
    const int la = labels[static_cast<size_t>(a)];
    if (la < 0 || la != labels[static_cast<size_t>(b)]) continue;
    const auto& p = matches[static_cast<size_t>(a)].x;
    const auto& q = matches[static_cast<size_t>(b)].x;
    if (p == q) continue;
    out << fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\"/>\n", p.x(),
                       p.y(), q.x(), q.y(), LabelColor(la));
  }
  out << "</g>\n<g stroke-width=\"0.5\">\n";
  for (size_t i = 0; i < matches.size(); ++i) {
    const std::string color = LabelColor(labels[i]);
    out << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"{}\" stroke=\"{}\"/>\n",
                       matches[i].x.x(), matches[i].x.y(), color, color);
  }
  out << "</g>\n</svg>\n";
  return out.str();
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidArgument, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace planemerge
