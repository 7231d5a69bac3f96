#pragma once

#include <span>
#include <vector>

#include "pidfuse/types.hpp"

namespace pidfuse {

// Per-frame weight a_i = quality_score * detection_score.
double raw_frame_weight(const FrameObservation& frame);

// Raw weights scaled to sum to 1. Falls back to 1/n when every raw weight
// is zero. Throws kEmptyFrameList.
std::vector<double> frame_weights(std::span<const FrameObservation> frames);

// Clip feature F = sum(f_i * a_i) / sum(a_i) using the raw weights, with a
// uniform mean when sum(a_i) == 0. Accumulation is order-independent, so
// any permutation of `frames` yields the same result.
// Throws kEmptyFrameList, kDimensionMismatch.
Embedding aggregate_clip(std::span<const FrameObservation> frames);

// Same quantity computed as the dot product of frame_weights() with the
// frame embeddings.
Embedding aggregate_clip_normalized(std::span<const FrameObservation> frames);

// Frames whose quality_score is at least `min_quality`.
std::vector<FrameObservation> filter_by_quality(std::span<const FrameObservation> frames,
                                                double min_quality);

}  // namespace pidfuse
