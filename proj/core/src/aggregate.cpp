#include "pidfuse/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pidfuse/error.hpp"

namespace pidfuse {
namespace {

// Sorting the terms first makes the sum independent of input order;
// Neumaier compensation keeps it accurate.
double stable_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  double comp = 0.0;
  for (double t : terms) {
    const double next = sum + t;
    if (std::abs(sum) >= std::abs(t)) {
      comp += (sum - next) + t;
    } else {
      comp += (t - next) + sum;
    }
    sum = next;
  }
  return sum + comp;
}

std::size_t common_dim(std::span<const FrameObservation> frames) {
  if (frames.empty()) throw Error(ErrorKind::kEmptyFrameList, "frame list is empty");
  const std::size_t dim = frames.front().embedding.size();
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].embedding.size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "frames[" + std::to_string(i) + "] has dim " +
                      std::to_string(frames[i].embedding.size()) + ", expected " +
                      std::to_string(dim));
    }
  }
  return dim;
}

Embedding weighted_combination(std::span<const FrameObservation> frames,
                               const std::vector<double>& weights, double denominator) {
  const std::size_t dim = common_dim(frames);
  Embedding out(dim, 0.0);
  std::vector<double> terms(frames.size());
  for (std::size_t k = 0; k < dim; ++k) {
    double lo = frames[0].embedding[k], hi = lo;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      terms[i] = frames[i].embedding[k] * weights[i];
      lo = std::min(lo, frames[i].embedding[k]);
      hi = std::max(hi, frames[i].embedding[k]);
    }
    // The exact value is a convex combination; rounding can step an ulp outside.
    out[k] = std::clamp(stable_sum(terms) / denominator, lo, hi);
  }
  return out;
}

}  // namespace

double raw_frame_weight(const FrameObservation& frame) {
  return frame.quality_score * frame.detection_score;
}

std::vector<double> frame_weights(std::span<const FrameObservation> frames) {
  if (frames.empty()) throw Error(ErrorKind::kEmptyFrameList, "frame list is empty");
  std::vector<double> raw(frames.size());
  std::transform(frames.begin(), frames.end(), raw.begin(), raw_frame_weight);
  std::vector<double> scratch = raw;
  const double total = stable_sum(scratch);
  if (total <= 0.0) return std::vector<double>(frames.size(), 1.0 / static_cast<double>(frames.size()));
  for (double& w : raw) w /= total;
  return raw;
}

Embedding aggregate_clip(std::span<const FrameObservation> frames) {
  common_dim(frames);
  std::vector<double> raw(frames.size());
  std::transform(frames.begin(), frames.end(), raw.begin(), raw_frame_weight);
  std::vector<double> scratch = raw;
  const double total = stable_sum(scratch);
  if (total <= 0.0) {
    return weighted_combination(frames, std::vector<double>(frames.size(), 1.0),
                                static_cast<double>(frames.size()));
  }
  return weighted_combination(frames, raw, total);
}

Embedding aggregate_clip_normalized(std::span<const FrameObservation> frames) {
  common_dim(frames);
  return weighted_combination(frames, frame_weights(frames), 1.0);
}

std::vector<FrameObservation> filter_by_quality(std::span<const FrameObservation> frames,
                                                double min_quality) {
  std::vector<FrameObservation> kept;
  for (const auto& f : frames) {
    if (f.quality_score >= min_quality) kept.push_back(f);
  }
  return kept;
}

}  // namespace pidfuse
