#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "planemerge/bench.h"
#include "planemerge/geometry.h"
#include "planemerge/pipeline.h"
#include "planemerge/types.h"

// Text formats used by the command-line tool. Parse failures throw ParseError
// with a "line N: " (match files) or "key.path: " (JSON documents) prefix.
namespace planemerge {

inline constexpr int kMatchFileVersion = 1;
inline constexpr int kLabelingVersion = 1;

// Match file, version 1 (see docs/formats.md):
//
//   planemerge-matches 1
//   intrinsics k00 k01 k02 k10 k11 k12 k20 k21 k22   (optional)
//   image <width> <height>                           (optional)
//   fields [color] [gt]                              (optional, default none)
//   <id> <x1> <y1> <x2> <y2> [<r> <g> <b>] [<gt>]    one per correspondence
//
// Blank lines and lines starting with '#' are skipped. Header lines must come
// before the first record.
struct MatchFile {
  std::optional<Intrinsics> intrinsics;
  std::optional<Eigen::Vector2i> image_size;  // width, height
  bool has_color = false;
  bool has_gt = false;
  Matches matches;
  std::vector<std::string> warnings;  // filled by the parser
};

MatchFile ParseMatchFile(std::istream& in);
MatchFile ReadMatchFile(const std::filesystem::path& path);
// Doubles are written in shortest round-trip form, so output is a pure
// function of the input.
void WriteMatchFile(std::ostream& out, const MatchFile& file);

MatchFile MatchFileFromScene(const SceneSpec& spec, const GeneratedScene& scene);

// JSON run configuration. Every key is optional; unknown keys and wrong value
// types are ParseErrors. The result is validated (InvalidArgument).
PipelineConfig ParseRunConfig(std::string_view json);
std::string RunConfigJson(const PipelineConfig& cfg);

// JSON scene description for `synth --spec`, same conventions.
SceneSpec ParseSceneSpec(std::string_view json);

struct LabelingDocument {
  std::vector<int64_t> ids;
  std::vector<int> labels;  // kOutlier for unassigned matches
};

std::string LabelingJson(std::span<const Correspondence> matches, const PatchLabeling& labeling,
                         const PipelineResult* diagnostics = nullptr);
LabelingDocument ParseLabeling(std::string_view json);

// Labels in match order. Throws InvalidArgument unless the document names
// exactly the ids of `matches`.
std::vector<int> AlignLabels(const LabelingDocument& doc, std::span<const Correspondence> matches);

// Per-stage diagnostics: patch counts, energies, lower-bound trace, timings.
std::string DiagnosticsJson(const PipelineResult& result);

std::vector<std::string> StageNames();
// The output of one pipeline stage. Throws InvalidArgument for an unknown
// stage name or a stage that did not run.
std::string StageJson(const PipelineResult& result, std::span<const Correspondence> matches,
                      std::string_view stage);

// Colour of a label; outliers get gray. Deterministic.
std::string LabelColor(int label);
inline constexpr std::string_view kOutlierColor = "#a0a0a0";

// Image-1 points coloured by label with the Delaunay edges whose endpoints
// share a label. The canvas is `size` when given, else the point bounds.
std::string RenderSvg(std::span<const Correspondence> matches, std::span<const int> labels,
                      std::optional<Eigen::Vector2i> size = std::nullopt);

std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace planemerge
