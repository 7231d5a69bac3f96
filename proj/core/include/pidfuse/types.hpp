#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pidfuse {

using Embedding = std::vector<double>;

enum class Modality { kFace = 0, kHead = 1, kAudio = 2 };

inline constexpr std::array<Modality, 3> kAllModalities = {Modality::kFace, Modality::kHead,
                                                           Modality::kAudio};

std::string_view to_string(Modality m);
// Throws Error(kInvalidConfig) for unknown names.
Modality parse_modality(std::string_view name);

struct FrameObservation {
  Embedding embedding;
  double quality_score = 0.0;
  double detection_score = 0.0;

  bool operator==(const FrameObservation&) const = default;
};

struct ClipRecord {
  std::string clip_id;
  std::vector<FrameObservation> frames;
  std::map<Modality, Embedding> clip_embeddings;
  // Absent for distractors (unknown identities).
  std::optional<int> label;

  bool operator==(const ClipRecord&) const = default;
};

// Expected embedding width per modality.
using DimensionMap = std::map<Modality, std::size_t>;

struct PredictionEntry {
  std::string clip_id;
  double result_score = 0.0;
  int rank_score = 1;  // 1-indexed

  bool operator==(const PredictionEntry&) const = default;
};

inline constexpr std::size_t kPredictionListCap = 100;

struct PredictionList {
  int label = 0;
  std::vector<PredictionEntry> entries;

  bool operator==(const PredictionList&) const = default;
};

// Builds a PredictionList from (clip_id, score) candidates: sorts by score
// descending (ties by clip_id), truncates to `cap` and assigns ranks 1..K.
PredictionList make_prediction_list(int label,
                                    std::vector<std::pair<std::string, double>> candidates,
                                    std::size_t cap = kPredictionListCap);

struct ScoredClip {
  std::string clip_id;
  double score = 0.0;

  bool operator==(const ScoredClip&) const = default;
};

// label -> ranked clips, best first.
struct RetrievalResult {
  std::map<int, std::vector<ScoredClip>> lists;

  bool operator==(const RetrievalResult&) const = default;
};

// Orders by score descending, then clip_id ascending.
bool ranks_before(const ScoredClip& a, const ScoredClip& b);

// Checks every ClipRecord invariant against `dims`. Throws Error with kind
// kDimensionMismatch, kEmptyClip, kScoreOutOfRange, kNonFiniteInput or
// kLabelOutOfRange (only when `num_classes` is given).
void validate_clip(const ClipRecord& clip, const DimensionMap& dims,
                   std::optional<int> num_classes = std::nullopt);

}  // namespace pidfuse
