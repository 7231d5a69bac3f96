#include "pidfuse/pipeline.hpp"

#include <algorithm>
#include <string>

#include "pidfuse/aggregate.hpp"
#include "pidfuse/error.hpp"

namespace pidfuse {
namespace {

std::string part_b_key(Modality m) { return "B-" + std::string(to_string(m)); }

// Per-label top lists from a clips x classes probability matrix.
ModelPredictions rank_by_label(const std::vector<std::string>& ids, const Matrix& probs,
                               std::size_t num_labels) {
  ModelPredictions out;
  for (std::size_t l = 0; l < num_labels; ++l) {
    std::vector<std::pair<std::string, double>> candidates;
    candidates.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      candidates.emplace_back(ids[i], probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)));
    }
    out[static_cast<int>(l)] = make_prediction_list(static_cast<int>(l), std::move(candidates));
  }
  return out;
}

std::vector<const MlpParams*> models_for(const std::vector<GridModel>& grid, Modality m) {
  std::vector<const MlpParams*> out;
  for (const auto& g : grid) {
    if (g.modality == m) out.push_back(&g.params);
  }
  return out;
}

Matrix modality_scores(std::span<const ClipRecord> clips, const std::vector<const MlpParams*>& models,
                       Modality modality, std::vector<std::string>& ids) {
  std::vector<Embedding> feats;
  for (const auto& c : clips) {
    if (auto f = modality_feature(c, modality)) {
      ids.push_back(c.clip_id);
      feats.push_back(std::move(*f));
    }
  }
  if (feats.empty()) return Matrix(0, 0);
  return ensemble_probs(models, to_matrix(feats));
}

RetrievalResult empty_result(std::size_t num_labels) {
  RetrievalResult r;
  for (std::size_t l = 0; l < num_labels; ++l) r.lists[static_cast<int>(l)];
  return r;
}

void min_max_normalize(std::vector<ScoredClip>& list) {
  if (list.empty()) return;
  const auto [lo, hi] = std::minmax_element(list.begin(), list.end(),
                                            [](const auto& a, const auto& b) { return a.score < b.score; });
  const double min = lo->score;
  const double range = hi->score - min;
  for (auto& c : list) c.score = range > 0.0 ? (c.score - min) / range : 1.0;
}

}  // namespace

ModelGrid train_grid(std::span<const ClipRecord> train_clips, std::size_t num_classes,
                     const RoutingConfig& routing, const TrainConfig& train, std::size_t threads) {
  ModelGrid grid;
  grid.num_classes = num_classes;
  grid.routing = routing;
  grid.part_a = train_part_a(train_clips, num_classes, routing, train, threads);
  grid.part_b = train_part_b(train_clips, num_classes, routing, train, threads);
  return grid;
}

StagePredictions predict(std::span<const ClipRecord> gallery, const ModelGrid& grid) {
  StagePredictions out;
  out.num_labels = grid.num_classes;
  const Routing routed = route(gallery, grid.routing);

  // Part A: collect every applicable (band, fold) output per clip, then average.
  const std::size_t n_a = routed.part_a.size();
  std::vector<std::string> a_ids;
  for (const auto& c : routed.part_a) a_ids.push_back(c.clip_id);
  std::map<double, std::vector<const GridModel*>> by_band;
  for (const auto& m : grid.part_a) by_band[m.band].push_back(&m);

  std::vector<std::vector<std::vector<double>>> outputs(n_a);  // clip -> model -> probs
  for (const auto& [band, models] : by_band) {
    std::vector<std::size_t> rows;
    std::vector<Embedding> feats;
    for (std::size_t i = 0; i < n_a; ++i) {
      const auto kept = filter_by_quality(routed.part_a[i].frames, band);
      if (kept.empty()) continue;
      rows.push_back(i);
      feats.push_back(aggregate_clip(kept));
    }
    if (feats.empty()) continue;
    const Matrix x = to_matrix(feats);
    for (const GridModel* m : models) {
      const Matrix p = predict_proba(m->params, x);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = p.row(static_cast<Eigen::Index>(r));
        outputs[rows[r]].emplace_back(row.data(), row.data() + row.size());
      }
    }
  }
  if (n_a > 0 && !grid.part_a.empty()) {
    Matrix mean = Matrix::Zero(static_cast<Eigen::Index>(n_a), static_cast<Eigen::Index>(grid.num_classes));
    std::vector<double> terms;
    for (std::size_t i = 0; i < n_a; ++i) {
      const auto& outs = outputs[i];
      if (outs.empty()) continue;
      for (std::size_t l = 0; l < grid.num_classes; ++l) {
        terms.clear();
        for (const auto& o : outs) terms.push_back(o[l]);
        std::sort(terms.begin(), terms.end());
        double s = 0.0;
        for (double t : terms) s += t;
        mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = s / static_cast<double>(terms.size());
      }
    }
    out.part_a = rank_by_label(a_ids, mean, grid.num_classes);
  }

  // Part B: one ensemble per modality over its fold models.
  for (Modality m : kAllModalities) {
    const auto models = models_for(grid.part_b, m);
    if (models.empty()) continue;
    std::vector<std::string> ids;
    const Matrix probs = modality_scores(routed.part_b, models, m, ids);
    if (ids.empty()) continue;
    out.part_b[part_b_key(m)] = rank_by_label(ids, probs, grid.num_classes);
  }
  return out;
}

RetrievalResult part_a_retrieval(const StagePredictions& predictions, std::size_t k) {
  RetrievalResult r = empty_result(predictions.num_labels);
  for (const auto& [label, list] : predictions.part_a) {
    auto& out = r.lists[label];
    for (const auto& e : list.entries) {
      if (out.size() == k) break;
      out.push_back({e.clip_id, e.result_score});
    }
  }
  return r;
}

RetrievalResult part_b_retrieval(const StagePredictions& predictions, std::size_t k) {
  return fuse_all(predictions.part_b, predictions.num_labels, k);
}

RetrievalResult merge_parts(const RetrievalResult& part_a, const RetrievalResult& part_b,
                            std::size_t k) {
  RetrievalResult merged;
  auto labels = [](const RetrievalResult& r) {
    std::vector<int> ls;
    for (const auto& [l, _] : r.lists) ls.push_back(l);
    return ls;
  };
  std::vector<int> all = labels(part_a);
  for (int l : labels(part_b)) all.push_back(l);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  for (int label : all) {
    std::vector<ScoredClip> a, b;
    if (auto it = part_a.lists.find(label); it != part_a.lists.end()) a = it->second;
    if (auto it = part_b.lists.find(label); it != part_b.lists.end()) b = it->second;
    if (!a.empty() && !b.empty()) {
      min_max_normalize(a);
      min_max_normalize(b);
    }
    auto& out = merged.lists[label];
    out = std::move(a);
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end(), ranks_before);
    if (out.size() > k) out.resize(k);
  }
  return merged;
}

RetrievalResult fuse_predictions(const StagePredictions& predictions, std::size_t k) {
  // Part B is fused on its own top-100 lists before the final cut.
  return merge_parts(part_a_retrieval(predictions, kPredictionListCap),
                     part_b_retrieval(predictions, kPredictionListCap), k);
}

RetrievalResult run_pipeline(std::span<const ClipRecord> gallery, const ModelGrid& grid, std::size_t k) {
  return fuse_predictions(predict(gallery, grid), k);
}

RetrievalResult single_modality_retrieval(std::span<const ClipRecord> gallery, const ModelGrid& grid,
                                          Modality modality, std::size_t k) {
  const auto models = models_for(grid.part_b, modality);
  if (models.empty()) {
    throw Error(ErrorKind::kMissingModality,
                "grid has no Part B models for " + std::string(to_string(modality)));
  }
  std::vector<std::string> ids;
  const Matrix probs = modality_scores(gallery, models, modality, ids);
  RetrievalResult r = empty_result(grid.num_classes);
  if (ids.empty()) return r;
  for (const auto& [label, list] : rank_by_label(ids, probs, grid.num_classes)) {
    auto& out = r.lists[label];
    for (const auto& e : list.entries) {
      if (out.size() == k) break;
      out.push_back({e.clip_id, e.result_score});
    }
  }
  return r;
}

}  // namespace pidfuse
