#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "pidfuse/eval.hpp"
#include "pidfuse/types.hpp"

namespace pidfuse {

// Stand-in for the face/head/audio extractors: each identity owns one unit
// prototype per modality and observations are noisy copies of it. Low-quality
// frames are noisier, so quality routing and banding behave as with real
// face features.
struct SynthConfig {
  std::size_t n_identities = 50;
  std::size_t n_clips_per_identity = 10;        // gallery clips per identity
  std::size_t n_train_clips_per_identity = 10;  // labeled training clips per identity
  std::size_t n_distractor_clips = 100;         // unlabeled gallery clips
  std::size_t dim = 64;
  std::size_t frames_min = 1;
  std::size_t frames_max = 5;
  std::map<Modality, double> modality_noise = {
      {Modality::kFace, 0.2}, {Modality::kHead, 0.6}, {Modality::kAudio, 1.2}};
  std::map<Modality, double> modality_dropout = {
      {Modality::kFace, 0.1}, {Modality::kHead, 0.2}, {Modality::kAudio, 0.3}};
  // Noise std-devs are per coordinate at this width and scale with
  // sqrt(noise_reference_dim / dim) elsewhere. Set it to `dim` for plain
  // per-coordinate noise.
  std::size_t noise_reference_dim = 4;
  double quality_noise_coupling = 1.0;
  double detection_noise = 0.15;
  std::uint64_t seed = 7;
};

inline constexpr double kMaxQualityScore = 200.0;

// Throws kInvalidConfig.
void validate(const SynthConfig& config);

struct SynthCorpus {
  std::vector<ClipRecord> train;
  std::vector<ClipRecord> gallery;
  GroundTruth truth;  // positives among gallery clips
  DimensionMap dims;
  std::size_t num_classes = 0;
};

// Deterministic for a fixed config (including seed). Distractor clips use
// fresh prototypes, carry no label and never appear in the truth.
SynthCorpus generate(const SynthConfig& config);

}  // namespace pidfuse
