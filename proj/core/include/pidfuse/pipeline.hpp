#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "pidfuse/rankfusion.hpp"
#include "pidfuse/router.hpp"

namespace pidfuse {

struct ModelGrid {
  std::size_t num_classes = 0;
  RoutingConfig routing;
  std::vector<GridModel> part_a;  // bands x folds
  std::vector<GridModel> part_b;  // modalities x folds
};

ModelGrid train_grid(std::span<const ClipRecord> train_clips, std::size_t num_classes,
                     const RoutingConfig& routing, const TrainConfig& train, std::size_t threads = 1);

// Per-label top-100 lists of the Part A face-grid ensemble, and one set of
// lists per modality ensemble for Part B.
struct StagePredictions {
  std::size_t num_labels = 0;
  ModelPredictions part_a;
  PredictionSet part_b;  // keyed "B-<modality>"

  bool operator==(const StagePredictions&) const = default;
};

// Routes `gallery`, averages every applicable Part A model over the
// band-filtered aggregates of each Part A clip, and averages each modality's
// fold models over the Part B clips carrying that modality.
StagePredictions predict(std::span<const ClipRecord> gallery, const ModelGrid& grid);

// Part A lists as retrieval lists scored by ensemble probability.
RetrievalResult part_a_retrieval(const StagePredictions& predictions, std::size_t k);

// Rank fusion over the Part B modality lists.
RetrievalResult part_b_retrieval(const StagePredictions& predictions, std::size_t k);

// Per label: when both parts contribute, each side's scores are min-max
// normalized to [0, 1] (a constant side maps to 1) before the candidates
// are concatenated, re-sorted and truncated to k. A side that is alone
// keeps its raw scores.
RetrievalResult merge_parts(const RetrievalResult& part_a, const RetrievalResult& part_b,
                            std::size_t k);

RetrievalResult fuse_predictions(const StagePredictions& predictions, std::size_t k);

RetrievalResult run_pipeline(std::span<const ClipRecord> gallery, const ModelGrid& grid,
                             std::size_t k = kPredictionListCap);

// Every gallery clip carrying `modality`, scored by that modality's Part B
// fold ensemble alone.
RetrievalResult single_modality_retrieval(std::span<const ClipRecord> gallery, const ModelGrid& grid,
                                          Modality modality, std::size_t k = kPredictionListCap);

}  // namespace pidfuse
