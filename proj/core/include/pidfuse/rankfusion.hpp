#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pidfuse/types.hpp"

namespace pidfuse {

// label -> that label's ranked list, for one model.
using ModelPredictions = std::map<int, PredictionList>;
// model name -> predictions.
using PredictionSet = std::map<std::string, ModelPredictions>;

// Ranks must be exactly 1..K in order, scores in [0, 1] and non-increasing
// with rank, clip ids unique. Throws kInvalidRanking, kScoreOutOfRange,
// kDuplicateClipWithinList.
void validate_prediction_list(const PredictionList& list);

// Weighted score of each clip: the sum over models listing it of
// result_score / rank_score. Models that do not list a clip add nothing.
// Output is sorted by W descending, ties by clip_id.
std::vector<ScoredClip> fuse_label(int label, std::span<const PredictionList> lists);

// fuse_label for every label in [0, num_labels), truncated to k. Labels no
// model predicts get an empty list. Throws kLabelOutOfRange plus
// fuse_label's errors.
RetrievalResult fuse_all(const PredictionSet& predictions, std::size_t num_labels,
                         std::size_t k = kPredictionListCap);

}  // namespace pidfuse
