#include "pidfuse/eval.hpp"

#include <algorithm>
#include <unordered_set>

#include "pidfuse/error.hpp"

namespace pidfuse {
namespace {

void check_unique(std::span<const std::string> ranked) {
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ranked) {
    if (!seen.insert(id).second) {
      throw Error(ErrorKind::kDuplicateInRanking, "clip '" + id + "' appears twice in a ranking");
    }
  }
}

const std::vector<ScoredClip>& list_for(const RetrievalResult& result, int label) {
  auto it = result.lists.find(label);
  if (it == result.lists.end()) {
    throw Error(ErrorKind::kMissingLabel, "label " + std::to_string(label) + " missing from retrieval");
  }
  return it->second;
}

void check_truth_label(int label, const std::set<std::string>& positives) {
  if (positives.empty()) {
    throw Error(ErrorKind::kInvalidConfig,
                "ground truth label " + std::to_string(label) + " has no positives");
  }
}

}  // namespace

std::vector<std::string> clip_ids(std::span<const ScoredClip> ranked) {
  std::vector<std::string> ids;
  ids.reserve(ranked.size());
  for (const auto& c : ranked) ids.push_back(c.clip_id);
  return ids;
}

double average_precision(std::span<const std::string> ranked, const std::set<std::string>& positives,
                         std::size_t m, std::size_t cut) {
  if (m == 0) throw Error(ErrorKind::kInvalidConfig, "average precision needs m >= 1");
  check_unique(ranked);
  const std::size_t depth = std::min(cut, ranked.size());
  std::size_t found = 0;
  double sum = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (positives.contains(ranked[r])) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(m);
}

std::vector<LabelAp> per_label_ap(const RetrievalResult& result, const GroundTruth& truth,
                                  std::size_t cut) {
  std::vector<LabelAp> out;
  out.reserve(truth.positives.size());
  for (const auto& [label, positives] : truth.positives) {
    check_truth_label(label, positives);
    const auto ids = clip_ids(list_for(result, label));
    out.push_back({label, average_precision(ids, positives, positives.size(), cut), positives.size()});
  }
  return out;
}

double mean_average_precision(const RetrievalResult& result, const GroundTruth& truth,
                              std::size_t cut) {
  if (truth.positives.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ap : per_label_ap(result, truth, cut)) total += ap.ap;
  return total / static_cast<double>(truth.positives.size());
}

double oracle_map(const RetrievalResult& result, const GroundTruth& truth, std::size_t cut) {
  if (truth.positives.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [label, positives] : truth.positives) {
    check_truth_label(label, positives);
    const auto ids = clip_ids(list_for(result, label));
    check_unique(ids);
    const std::vector<std::string> kept(ids.begin(),
                                        ids.begin() + static_cast<std::ptrdiff_t>(std::min(cut, ids.size())));
    const std::size_t m = positives.size();
    double inner = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      // Shortest prefix holding j positives, if the kept list has one.
      for (std::size_t len = 1; len <= kept.size(); ++len) {
        const auto hits = static_cast<std::size_t>(std::count_if(
            kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(len),
            [&](const std::string& id) { return positives.contains(id); }));
        if (hits == j) {
          inner += static_cast<double>(hits) / static_cast<double>(len);
          break;
        }
      }
    }
    total += inner / static_cast<double>(m);
  }
  return total / static_cast<double>(truth.positives.size());
}

}  // namespace pidfuse
