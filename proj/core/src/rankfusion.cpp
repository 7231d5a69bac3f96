#include "pidfuse/rankfusion.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "pidfuse/error.hpp"

namespace pidfuse {

void validate_prediction_list(const PredictionList& list) {
  const std::string where = "prediction list for label " + std::to_string(list.label);
  if (list.entries.size() > kPredictionListCap) {
    throw Error(ErrorKind::kInvalidRanking, where + " holds more than " +
                                                std::to_string(kPredictionListCap) + " entries");
  }
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < list.entries.size(); ++i) {
    const auto& e = list.entries[i];
    if (e.rank_score != static_cast<int>(i + 1)) {
      throw Error(ErrorKind::kInvalidRanking, where + ": entry " + std::to_string(i) + " has rank " +
                                                  std::to_string(e.rank_score));
    }
    if (!(e.result_score >= 0.0 && e.result_score <= 1.0)) {
      throw Error(ErrorKind::kScoreOutOfRange, where + ": result_score of '" + e.clip_id +
                                                   "' outside [0, 1]");
    }
    if (i > 0 && e.result_score > list.entries[i - 1].result_score) {
      throw Error(ErrorKind::kInvalidRanking, where + ": result_score increases at rank " +
                                                  std::to_string(e.rank_score));
    }
    if (!seen.insert(e.clip_id).second) {
      throw Error(ErrorKind::kDuplicateClipWithinList, where + " lists '" + e.clip_id + "' twice");
    }
  }
}

std::vector<ScoredClip> fuse_label(int label, std::span<const PredictionList> lists) {
  std::unordered_map<std::string, std::vector<double>> terms;
  for (const auto& list : lists) {
    if (list.label != label) {
      throw Error(ErrorKind::kLabelOutOfRange, "list for label " + std::to_string(list.label) +
                                                   " passed to fuse_label(" + std::to_string(label) + ")");
    }
    validate_prediction_list(list);
    for (const auto& e : list.entries) {
      terms[e.clip_id].push_back(e.result_score / static_cast<double>(e.rank_score));
    }
  }
  std::vector<ScoredClip> fused;
  fused.reserve(terms.size());
  for (auto& [clip_id, parts] : terms) {
    // Fixed summation order keeps W independent of model order.
    std::sort(parts.begin(), parts.end());
    double w = 0.0;
    for (double p : parts) w += p;
    fused.push_back({clip_id, w});
  }
  std::sort(fused.begin(), fused.end(), ranks_before);
  return fused;
}

RetrievalResult fuse_all(const PredictionSet& predictions, std::size_t num_labels, std::size_t k) {
  std::map<int, std::vector<PredictionList>> by_label;
  for (const auto& [model, per_label] : predictions) {
    for (const auto& [label, list] : per_label) {
      if (label < 0 || static_cast<std::size_t>(label) >= num_labels || list.label != label) {
        throw Error(ErrorKind::kLabelOutOfRange, "model '" + model + "' predicts label " +
                                                     std::to_string(label) + " outside [0, " +
                                                     std::to_string(num_labels) + ")");
      }
      by_label[label].push_back(list);
    }
  }
  RetrievalResult result;
  for (std::size_t l = 0; l < num_labels; ++l) {
    const int label = static_cast<int>(l);
    auto& out = result.lists[label];
    auto it = by_label.find(label);
    if (it == by_label.end()) continue;
    out = fuse_label(label, it->second);
    if (out.size() > k) out.resize(k);
  }
  return result;
}

}  // namespace pidfuse
