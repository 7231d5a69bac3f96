#include "pidfuse/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "pidfuse/error.hpp"
#include "pidfuse/rng.hpp"

namespace pidfuse {
namespace {

using Prototypes = std::map<Modality, Embedding>;

Embedding unit_vector(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Embedding v(dim);
  double norm = 0.0;
  do {
    for (double& x : v) x = gauss(rng);
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  } while (norm == 0.0);
  for (double& x : v) x /= norm;
  return v;
}

Prototypes draw_prototypes(std::size_t dim, Rng& rng) {
  Prototypes p;
  for (Modality m : kAllModalities) p[m] = unit_vector(dim, rng);
  return p;
}

// Per-coordinate std-dev; scaling by sqrt(reference / dim) keeps the noise
// norm, and hence the difficulty, independent of the embedding width.
double coordinate_sigma(double noise, const SynthConfig& c) {
  return noise * std::sqrt(static_cast<double>(c.noise_reference_dim) / static_cast<double>(c.dim));
}

Embedding noisy_copy(const Embedding& proto, double sigma, Rng& rng) {
  Embedding e = proto;
  if (sigma > 0.0) {
    std::normal_distribution<double> gauss(0.0, sigma);
    for (double& x : e) x += gauss(rng);
  }
  return e;
}

ClipRecord draw_clip(const Prototypes& proto, std::optional<int> label, const SynthConfig& c,
                     Rng& rng) {
  std::bernoulli_distribution face_gone(c.modality_dropout.at(Modality::kFace));
  std::bernoulli_distribution head_gone(c.modality_dropout.at(Modality::kHead));
  std::bernoulli_distribution audio_gone(c.modality_dropout.at(Modality::kAudio));
  bool has_face = !face_gone(rng);
  const bool has_head = !head_gone(rng);
  const bool has_audio = !audio_gone(rng);
  // A clip always carries at least one modality.
  if (!has_face && !has_head && !has_audio) has_face = true;

  ClipRecord clip;
  clip.label = label;
  if (has_face) {
    std::uniform_int_distribution<std::size_t> count(c.frames_min, c.frames_max);
    std::uniform_real_distribution<double> quality(0.0, kMaxQualityScore);
    std::normal_distribution<double> det_noise(0.0, c.detection_noise);
    const std::size_t n = count(rng);
    const double base = c.modality_noise.at(Modality::kFace);
    for (std::size_t i = 0; i < n; ++i) {
      FrameObservation f;
      f.quality_score = quality(rng);
      const double det = f.quality_score / kMaxQualityScore + (c.detection_noise > 0 ? det_noise(rng) : 0.0);
      f.detection_score = std::clamp(det, 0.0, 1.0);
      const double sigma =
          base * (1.0 + c.quality_noise_coupling * (1.0 - f.quality_score / kMaxQualityScore));
      f.embedding = noisy_copy(proto.at(Modality::kFace), coordinate_sigma(sigma, c), rng);
      clip.frames.push_back(std::move(f));
    }
  }
  if (has_head) {
    clip.clip_embeddings[Modality::kHead] =
        noisy_copy(proto.at(Modality::kHead), coordinate_sigma(c.modality_noise.at(Modality::kHead), c), rng);
  }
  if (has_audio) {
    clip.clip_embeddings[Modality::kAudio] =
        noisy_copy(proto.at(Modality::kAudio), coordinate_sigma(c.modality_noise.at(Modality::kAudio), c), rng);
  }
  return clip;
}

std::string numbered(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%05zu", prefix, i);
  return buf;
}

}  // namespace

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); };
  if (c.n_identities < 2) fail("n_identities must be at least 2");
  if (c.dim == 0) fail("dim must be positive");
  if (c.noise_reference_dim == 0) fail("noise_reference_dim must be positive");
  if (c.frames_min == 0 || c.frames_min > c.frames_max) fail("frames range must satisfy 1 <= min <= max");
  for (Modality m : kAllModalities) {
    const auto noise = c.modality_noise.find(m);
    if (noise == c.modality_noise.end() || !(noise->second >= 0.0)) {
      fail("noise for " + std::string(to_string(m)) + " must be set and non-negative");
    }
    const auto drop = c.modality_dropout.find(m);
    if (drop == c.modality_dropout.end() || !(drop->second >= 0.0 && drop->second <= 1.0)) {
      fail("dropout for " + std::string(to_string(m)) + " must lie in [0, 1]");
    }
  }
  if (!(c.quality_noise_coupling >= 0.0)) fail("quality_noise_coupling must be >= 0");
  if (!(c.detection_noise >= 0.0)) fail("detection_noise must be >= 0");
}

SynthCorpus generate(const SynthConfig& c) {
  validate(c);
  Rng rng(c.seed);
  SynthCorpus out;
  out.num_classes = c.n_identities;
  for (Modality m : kAllModalities) out.dims[m] = c.dim;

  std::vector<Prototypes> identities;
  identities.reserve(c.n_identities);
  for (std::size_t i = 0; i < c.n_identities; ++i) identities.push_back(draw_prototypes(c.dim, rng));

  for (std::size_t i = 0; i < c.n_identities; ++i) {
    for (std::size_t j = 0; j < c.n_train_clips_per_identity; ++j) {
      out.train.push_back(draw_clip(identities[i], static_cast<int>(i), c, rng));
    }
  }
  for (std::size_t i = 0; i < c.n_identities; ++i) {
    for (std::size_t j = 0; j < c.n_clips_per_identity; ++j) {
      out.gallery.push_back(draw_clip(identities[i], static_cast<int>(i), c, rng));
    }
  }
  for (std::size_t d = 0; d < c.n_distractor_clips; ++d) {
    out.gallery.push_back(draw_clip(draw_prototypes(c.dim, rng), std::nullopt, c, rng));
  }

  // Ids carry no identity information; gallery order is shuffled first.
  std::shuffle(out.train.begin(), out.train.end(), rng);
  std::shuffle(out.gallery.begin(), out.gallery.end(), rng);
  for (std::size_t i = 0; i < out.train.size(); ++i) out.train[i].clip_id = numbered('t', i);
  for (std::size_t i = 0; i < out.gallery.size(); ++i) {
    auto& clip = out.gallery[i];
    clip.clip_id = numbered('g', i);
    if (clip.label) out.truth.positives[*clip.label].insert(clip.clip_id);
  }
  return out;
}

}  // namespace pidfuse
