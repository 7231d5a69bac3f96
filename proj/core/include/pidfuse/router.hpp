#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pidfuse/mlp.hpp"
#include "pidfuse/types.hpp"

namespace pidfuse {

struct RoutingConfig {
  std::vector<double> quality_bands = {40.0, 60.0, 80.0, 100.0};  // lower bounds
  double band_upper = 200.0;
  double part_a_quality_threshold = 40.0;
  double part_a_detection_threshold = 0.5;
  std::size_t folds = 5;
};

// Throws kInvalidConfig.
void validate(const RoutingConfig& config);

// True when some frame clears both the quality and the detection threshold.
bool routes_to_part_a(const ClipRecord& clip, const RoutingConfig& config);

struct Routing {
  std::vector<ClipRecord> part_a;
  std::vector<ClipRecord> part_b;
};

// Exhaustive, disjoint split preserving input order within each part.
Routing route(std::span<const ClipRecord> clips, const RoutingConfig& config);

// Clip-level feature for one modality. Face falls back to the weighted
// aggregate of all frames when no face clip embedding is stored.
std::optional<Embedding> modality_feature(const ClipRecord& clip, Modality modality);

// Stratified, seeded fold index for every example (label-wise round robin
// over a shuffled order).
std::vector<std::size_t> assign_folds(std::span<const int> labels, std::size_t folds,
                                      std::uint64_t seed);

enum class Part { kA, kB };

struct GridModel {
  Part part = Part::kA;
  Modality modality = Modality::kFace;
  double band = 0.0;  // Part A quality lower bound; unused for Part B
  std::size_t fold = 0;
  MlpParams params;
  std::vector<double> epoch_loss;

  std::string name() const;
};

// One MLP per (quality band, fold): frames below the band are dropped before
// aggregation and clips left without frames leave that band's training set.
// Throws kEmptyBand.
std::vector<GridModel> train_part_a(std::span<const ClipRecord> train_clips, std::size_t num_classes,
                                    const RoutingConfig& routing, const TrainConfig& train,
                                    std::size_t threads = 1);

// One MLP per (modality, fold) on clip-level modality features.
// Throws kMissingModality.
std::vector<GridModel> train_part_b(std::span<const ClipRecord> train_clips, std::size_t num_classes,
                                    const RoutingConfig& routing, const TrainConfig& train,
                                    std::size_t threads = 1,
                                    std::span<const Modality> modalities = kAllModalities);

// Mean of the infer-mode softmax outputs. Summation runs in a fixed order,
// so the result does not depend on model order.
// Throws kEmptyModelSet, kDimensionMismatch.
std::vector<double> ensemble_probs(std::span<const MlpParams* const> models, const Embedding& feature);

// Row-wise ensemble_probs over a batch of features.
Matrix ensemble_probs(std::span<const MlpParams* const> models, const Matrix& features);

}  // namespace pidfuse
