#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pidfuse/types.hpp"

namespace pidfuse {

inline constexpr std::size_t kDefaultRetrievalCut = 100;

// label -> positive clip ids. Every label must have at least one positive.
struct GroundTruth {
  std::map<int, std::set<std::string>> positives;

  std::size_t num_ids() const { return positives.size(); }
  bool operator==(const GroundTruth&) const = default;
};

// Average precision of `ranked` over its first `cut` entries:
// (1/m) * sum_j j / r_j over the ranks r_j of retrieved positives.
// Throws kDuplicateInRanking, kInvalidConfig (m == 0).
double average_precision(std::span<const std::string> ranked, const std::set<std::string>& positives,
                         std::size_t m, std::size_t cut = kDefaultRetrievalCut);

struct LabelAp {
  int label = 0;
  double ap = 0.0;
  std::size_t positives = 0;
};

// AP for every truth label, in label order. Throws kMissingLabel when a
// truth label has no entry in `result`.
std::vector<LabelAp> per_label_ap(const RetrievalResult& result, const GroundTruth& truth,
                                  std::size_t cut = kDefaultRetrievalCut);

// Unweighted mean of per-label AP over all truth labels.
double mean_average_precision(const RetrievalResult& result, const GroundTruth& truth,
                              std::size_t cut = kDefaultRetrievalCut);

// Recomputes MAP by walking each prefix R_{i,j} and counting positives in
// it. Independent of average_precision; used to cross-check it.
double oracle_map(const RetrievalResult& result, const GroundTruth& truth,
                  std::size_t cut = kDefaultRetrievalCut);

std::vector<std::string> clip_ids(std::span<const ScoredClip> ranked);

}  // namespace pidfuse
