#include "planemerge/types.h"

#include <cmath>
#include <string>
#include <unordered_map>

#include "planemerge/error.h"

namespace planemerge {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kPointAtInfinity: return "PointAtInfinity";
    case ErrorCode::kPureRotation: return "PureRotation";
    case ErrorCode::kDecompositionFailed: return "DecompositionFailed";
    case ErrorCode::kInsufficientMatches: return "InsufficientMatches";
    case ErrorCode::kExcessiveDegeneracy: return "ExcessiveDegeneracy";
    case ErrorCode::kEmbeddingFailed: return "EmbeddingFailed";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kMissingTexture: return "MissingTexture";
    case ErrorCode::kNoValidPatches: return "NoValidPatches";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kInvalidProblem: return "InvalidProblem";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kPlaneNotVisible: return "PlaneNotVisible";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

void ValidateCorrespondence(const Correspondence& c) {
  if (!c.x.allFinite() || !c.x_prime.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument,
                "non-finite coordinate in correspondence " + std::to_string(c.id));
  }
  if (c.color_mean) {
    const Eigen::Vector3d& mu = *c.color_mean;
    if (!mu.allFinite() || mu.minCoeff() < 0.0 || mu.maxCoeff() > 1.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "color mean outside [0,1] in correspondence " + std::to_string(c.id));
    }
  }
}

std::vector<std::vector<int>> PatchLabeling::Members() const {
  std::vector<std::vector<int>> members(static_cast<size_t>(patch_count));
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) members[static_cast<size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  return members;
}

size_t PatchLabeling::InlierCount() const {
  size_t n = 0;
  for (int l : labels) n += l >= 0 ? 1 : 0;
  return n;
}

PatchLabeling CompactLabels(std::span<const int> labels) {
  PatchLabeling out;
  out.labels.reserve(labels.size());
  std::unordered_map<int, int> remap;
  for (int l : labels) {
    if (l < 0) {
      out.labels.push_back(kOutlier);
      continue;
    }
    auto [it, inserted] = remap.try_emplace(l, out.patch_count);
    if (inserted) ++out.patch_count;
    out.labels.push_back(it->second);
  }
  return out;
}

PatchLabeling DropSmallPatches(const PatchLabeling& labeling, size_t min_size) {
  std::vector<size_t> counts(static_cast<size_t>(labeling.patch_count), 0);
  for (int l : labeling.labels) {
    if (l >= 0) ++counts[static_cast<size_t>(l)];
  }
  std::vector<int> labels = labeling.labels;
  for (int& l : labels) {
    if (l >= 0 && counts[static_cast<size_t>(l)] < min_size) l = kOutlier;
  }
  return CompactLabels(labels);
}

void ValidateLabeling(const PatchLabeling& labeling) {
  if (labeling.patch_count < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative patch count");
  }
  std::vector<bool> seen(static_cast<size_t>(labeling.patch_count), false);
  for (int l : labeling.labels) {
    if (l == kOutlier) continue;
    if (l < 0 || l >= labeling.patch_count) {
      throw Error(ErrorCode::kLabelOutOfRange, "label " + std::to_string(l) +
                                                   " outside 0.." +
                                                   std::to_string(labeling.patch_count - 1));
    }
    seen[static_cast<size_t>(l)] = true;
  }
  for (bool s : seen) {
    if (!s) throw Error(ErrorCode::kInvalidArgument, "patch ids are not contiguous");
  }
}

}  // namespace planemerge
