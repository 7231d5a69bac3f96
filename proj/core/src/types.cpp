#include "pidfuse/types.hpp"

#include <algorithm>
#include <cmath>

#include "pidfuse/error.hpp"

namespace pidfuse {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kEmptyClip: return "EmptyClip";
    case ErrorKind::kScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorKind::kNonFiniteInput: return "NonFiniteInput";
    case ErrorKind::kEmptyFrameList: return "EmptyFrameList";
    case ErrorKind::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kDuplicateClipWithinList: return "DuplicateClipWithinList";
    case ErrorKind::kInvalidRanking: return "InvalidRanking";
    case ErrorKind::kEmptyBand: return "EmptyBand";
    case ErrorKind::kMissingModality: return "MissingModality";
    case ErrorKind::kEmptyModelSet: return "EmptyModelSet";
    case ErrorKind::kDuplicateInRanking: return "DuplicateInRanking";
    case ErrorKind::kMissingLabel: return "MissingLabel";
    case ErrorKind::kTooShort: return "TooShort";
    case ErrorKind::kWrongSampleRate: return "WrongSampleRate";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kMalformedRecord: return "MalformedRecord";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kIoFailure: return "IoFailure";
  }
  return "Unknown";
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kFace: return "face";
    case Modality::kHead: return "head";
    case Modality::kAudio: return "audio";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  for (Modality m : kAllModalities) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown modality '" + std::string(name) + "'");
}

bool ranks_before(const ScoredClip& a, const ScoredClip& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.clip_id < b.clip_id;
}

PredictionList make_prediction_list(int label,
                                    std::vector<std::pair<std::string, double>> candidates,
                                    std::size_t cap) {
  auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t keep = std::min(cap, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), better);
  PredictionList list;
  list.label = label;
  list.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    list.entries.push_back({std::move(candidates[i].first), candidates[i].second,
                            static_cast<int>(i + 1)});
  }
  return list;
}

namespace {

void check_embedding(const Embedding& e, std::size_t dim, const std::string& field) {
  if (e.size() != dim) {
    throw Error(ErrorKind::kDimensionMismatch, field + " has " + std::to_string(e.size()) +
                                                   " entries, expected " + std::to_string(dim));
  }
  for (double v : e) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNonFiniteInput, field + " has a non-finite entry");
  }
}

std::size_t dim_for(const DimensionMap& dims, Modality m, const std::string& field) {
  auto it = dims.find(m);
  if (it == dims.end()) {
    throw Error(ErrorKind::kDimensionMismatch,
                field + ": no dimension configured for modality " + std::string(to_string(m)));
  }
  return it->second;
}

}  // namespace

void validate_clip(const ClipRecord& clip, const DimensionMap& dims,
                   std::optional<int> num_classes) {
  const std::string where = "clip '" + clip.clip_id + "'";
  if (clip.frames.empty() && clip.clip_embeddings.empty()) {
    throw Error(ErrorKind::kEmptyClip, where + " has neither frames nor clip_embeddings");
  }
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const auto& f = clip.frames[i];
    const std::string field = where + " frames[" + std::to_string(i) + "]";
    check_embedding(f.embedding, dim_for(dims, Modality::kFace, field), field + ".embedding");
    if (!std::isfinite(f.quality_score) || f.quality_score < 0.0) {
      throw Error(ErrorKind::kScoreOutOfRange, field + ".quality_score must be >= 0");
    }
    if (!std::isfinite(f.detection_score) || f.detection_score < 0.0 || f.detection_score > 1.0) {
      throw Error(ErrorKind::kScoreOutOfRange, field + ".detection_score must lie in [0, 1]");
    }
  }
  for (const auto& [m, e] : clip.clip_embeddings) {
    const std::string field = where + " clip_embeddings." + std::string(to_string(m));
    check_embedding(e, dim_for(dims, m, field), field);
  }
  if (clip.label && (*clip.label < 0 || (num_classes && *clip.label >= *num_classes))) {
    throw Error(ErrorKind::kLabelOutOfRange,
                where + " label " + std::to_string(*clip.label) + " is out of range");
  }
}

}  // namespace pidfuse
