#include "cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "planemerge/bench.h"
#include "planemerge/error.h"
#include "planemerge/io.h"
#include "planemerge/pipeline.h"

namespace planemerge::cli {
namespace {

namespace fs = std::filesystem;

// Input problems exit with 2; anything thrown while the pipeline runs with 3.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void WriteOutput(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) throw InputError(fmt::format("cannot write '{}'", path));
}

template <typename Fn>
auto Input(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw InputError(e.what());
  }
}

void CheckThreadsEnv(std::ostream& err) {
  const char* env = std::getenv("PLANEMERGE_THREADS");
  if (!env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) {
    err << fmt::format("warning: ignoring PLANEMERGE_THREADS='{}' (expected a positive integer)\n", env);
  }
}

struct SynthArgs {
  std::string preset;
  std::string spec;
  std::optional<uint64_t> seed;
  std::string output;
};

int Synth(const SynthArgs& a, std::ostream& out) {
  const SceneSpec spec = Input([&] {
    if (a.preset.empty() == a.spec.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "give exactly one of --preset or --spec");
    }
    SceneSpec s = a.preset.empty() ? ParseSceneSpec(ReadTextFile(a.spec)) : Preset(a.preset);
    if (a.seed) s.seed = *a.seed;
    return s;
  });
  const GeneratedScene scene = Input([&] { return GenerateScene(spec); });
  std::ostringstream text;
  WriteMatchFile(text, MatchFileFromScene(spec, scene));
  WriteOutput(a.output, text.str(), out);
  return kExitOk;
}

struct DetectArgs {
  std::string matches;
  std::string config;
  std::optional<uint64_t> seed;
  std::string output;
  std::vector<std::string> dump_stages;
};

int Detect(const DetectArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = Input([&] { return a.config.empty() ? PipelineConfig{} : ParseRunConfig(ReadTextFile(a.config)); });
  if (a.seed) cfg.seed = *a.seed;
  const MatchFile file = Input([&] { return ReadMatchFile(a.matches); });
  for (const auto& w : file.warnings) err << "warning: " << a.matches << ": " << w << '\n';
  const auto known = StageNames();
  for (const auto& s : a.dump_stages) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw InputError(fmt::format("unknown stage '{}' for --dump-stage", s));
    }
  }

  Intrinsics intrinsics;
  if (file.intrinsics) {
    intrinsics = *file.intrinsics;
  } else if (file.image_size) {
    const double f = std::max(file.image_size->x(), file.image_size->y());
    intrinsics = Intrinsics::FromFocal(f, f, file.image_size->x() / 2.0, file.image_size->y() / 2.0);
    err << fmt::format("warning: no intrinsics in {}; assuming focal {} and a centred principal point\n",
                       a.matches, f);
  } else {
    throw InputError(fmt::format("{}: no intrinsics or image size; the pipeline needs a camera", a.matches));
  }

  const PipelineResult result = RunPipeline(file.matches, intrinsics, cfg);

  WriteOutput(a.output, LabelingJson(file.matches, result.final_labeling, &result), out);
  for (const auto& s : a.dump_stages) {
    const std::string path =
        a.output.empty() || a.output == "-" ? fmt::format("planemerge.{}.json", s) : fmt::format("{}.{}.json", a.output, s);
    WriteOutput(path, Input([&] { return StageJson(result, file.matches, s); }), out);
  }
  if (!a.output.empty() && a.output != "-") {
    err << fmt::format("{} planes, {} outliers", result.final_labeling.patch_count,
                       result.final_labeling.size() - result.final_labeling.InlierCount());
    if (result.eval) err << fmt::format(", error {:.2f}% against gt", result.eval->error_percent);
    err << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string labels;
  std::string matches;
};

int Eval(const EvalArgs& a, std::ostream& out) {
  const EvalReport report = Input([&] {
    const MatchFile file = ReadMatchFile(a.matches);
    if (!file.has_gt) throw Error(ErrorCode::kInvalidArgument, fmt::format("{} carries no gt labels", a.matches));
    const auto pred = AlignLabels(ParseLabeling(ReadTextFile(a.labels)), file.matches);
    return Evaluate(pred, TruthLabels(file.matches));
  });
  out << RenderEvalReport(report);
  return kExitOk;
}

struct PlotArgs {
  std::string matches;
  std::string labels;
  std::string output;
};

int Plot(const PlotArgs& a, std::ostream& out) {
  const std::string svg = Input([&] {
    const MatchFile file = ReadMatchFile(a.matches);
    if (!a.labels.empty()) {
      const LabelingDocument doc = ParseLabeling(ReadTextFile(a.labels));
      if (doc.ids.empty()) return RenderSvg({}, {}, file.image_size);
      return RenderSvg(file.matches, AlignLabels(doc, file.matches), file.image_size);
    }
    // Without a labeling, colour by gt when present.
    std::vector<int> labels(file.matches.size(), kOutlier);
    if (file.has_gt) labels = TruthLabels(file.matches);
    return RenderSvg(file.matches, labels, file.image_size);
  });
  WriteOutput(a.output, svg, out);
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detect scene planes from two-view correspondences.", "planemerge"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic match file with gt labels");
  synth_cmd->add_option("--preset", synth.preset, "corner, box, corridor or lab");
  synth_cmd->add_option("--spec", synth.spec, "JSON scene description");
  synth_cmd->add_option("--seed", synth.seed, "Scene seed (overrides the spec)");
  synth_cmd->add_option("-o,--output", synth.output, "Output path, stdout by default");

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "Label matches with detected planes");
  detect_cmd->add_option("matches", detect.matches, "Match file")->required();
  detect_cmd->add_option("--config", detect.config, "JSON run configuration");
  detect_cmd->add_option("--seed", detect.seed, "Seed (overrides the config)");
  detect_cmd->add_option("-o,--output", detect.output, "Labeling output, stdout by default");
  detect_cmd->add_option("--dump-stage", detect.dump_stages,
                         "Also write one stage's output to <output>.<stage>.json "
                         "(sampling, initial_patches, refinement, plane_models, mrf)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a labeling against gt labels");
  eval_cmd->add_option("labels", eval.labels, "Labeling document")->required();
  eval_cmd->add_option("matches", eval.matches, "Match file with gt labels")->required();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plot", "Render matches and their labels as SVG");
  plot_cmd->add_option("matches", plot.matches, "Match file")->required();
  plot_cmd->add_option("labels", plot.labels, "Labeling document (gt colours when omitted)");
  plot_cmd->add_option("-o,--output", plot.output, "SVG output, stdout by default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  CheckThreadsEnv(err);
  try {
    if (*synth_cmd) return Synth(synth, out);
    if (*detect_cmd) return Detect(detect, out, err);
    if (*eval_cmd) return Eval(eval, out);
    if (*plot_cmd) return Plot(plot, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitInput;
}

}  // namespace planemerge::cli
