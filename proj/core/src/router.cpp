#include "pidfuse/router.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "pidfuse/aggregate.hpp"
#include "pidfuse/error.hpp"
#include "pidfuse/rng.hpp"

namespace pidfuse {
namespace {

constexpr std::uint64_t kFoldStream = 0xF01D;

// Runs jobs[0..n) on up to `threads` workers; the first exception wins.
void run_jobs(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& job) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct Dataset {
  std::vector<Embedding> features;
  std::vector<int> labels;
};

GridModel fit(Part part, Modality modality, double band, std::size_t fold, const Dataset& data,
              std::size_t num_classes, TrainConfig config, std::uint64_t cell) {
  config.rng_seed = derive_seed(config.rng_seed, cell);
  auto trained = train(to_matrix(data.features), data.labels, num_classes, config);
  GridModel m;
  m.part = part;
  m.modality = modality;
  m.band = band;
  m.fold = fold;
  m.params = std::move(trained.params);
  m.epoch_loss = std::move(trained.epoch_loss);
  return m;
}

struct Labeled {
  const ClipRecord* clip;
  int label;
};

std::vector<Labeled> labeled_clips(std::span<const ClipRecord> clips) {
  std::vector<Labeled> out;
  for (const auto& c : clips) {
    if (c.label) out.push_back({&c, *c.label});
  }
  return out;
}

std::vector<std::size_t> folds_for(const std::vector<Labeled>& clips, std::size_t folds,
                                   std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(clips.size());
  for (const auto& c : clips) labels.push_back(c.label);
  return assign_folds(labels, folds, derive_seed(seed, kFoldStream));
}

bool in_training_fold(std::size_t clip_fold, std::size_t model_fold, std::size_t folds) {
  return folds == 1 || clip_fold != model_fold;
}

std::string band_tag(double band) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03.0f", band);
  return buf;
}

}  // namespace

void validate(const RoutingConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); };
  if (c.quality_bands.empty()) fail("quality_bands must not be empty");
  for (std::size_t i = 0; i < c.quality_bands.size(); ++i) {
    if (!(c.quality_bands[i] >= 0.0)) fail("quality bands must be >= 0");
    if (i > 0 && !(c.quality_bands[i] > c.quality_bands[i - 1])) fail("quality_bands must be strictly increasing");
  }
  if (!(c.band_upper > c.quality_bands.back())) fail("band_upper must exceed every band");
  if (!(c.part_a_quality_threshold >= 0.0)) fail("part_a_quality_threshold must be >= 0");
  if (!(c.part_a_detection_threshold >= 0.0)) fail("part_a_detection_threshold must be >= 0");
  if (c.folds == 0) fail("folds must be >= 1");
}

bool routes_to_part_a(const ClipRecord& clip, const RoutingConfig& config) {
  return std::any_of(clip.frames.begin(), clip.frames.end(), [&](const FrameObservation& f) {
    return f.quality_score >= config.part_a_quality_threshold &&
           f.detection_score >= config.part_a_detection_threshold;
  });
}

Routing route(std::span<const ClipRecord> clips, const RoutingConfig& config) {
  Routing r;
  for (const auto& c : clips) {
    (routes_to_part_a(c, config) ? r.part_a : r.part_b).push_back(c);
  }
  return r;
}

std::optional<Embedding> modality_feature(const ClipRecord& clip, Modality modality) {
  if (auto it = clip.clip_embeddings.find(modality); it != clip.clip_embeddings.end()) return it->second;
  if (modality == Modality::kFace && !clip.frames.empty()) return aggregate_clip(clip.frames);
  return std::nullopt;
}

std::vector<std::size_t> assign_folds(std::span<const int> labels, std::size_t folds,
                                      std::uint64_t seed) {
  if (folds == 0) throw Error(ErrorKind::kInvalidConfig, "folds must be >= 1");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t cursor = 0;
  for (auto& [label, idx] : by_label) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) fold[i] = cursor++ % folds;
  }
  return fold;
}

std::string GridModel::name() const {
  if (part == Part::kA) return "A-q" + band_tag(band) + "-f" + std::to_string(fold);
  return "B-" + std::string(to_string(modality)) + "-f" + std::to_string(fold);
}

std::vector<GridModel> train_part_a(std::span<const ClipRecord> train_clips, std::size_t num_classes,
                                    const RoutingConfig& routing, const TrainConfig& train_config,
                                    std::size_t threads) {
  validate(routing);
  validate(train_config);
  const auto clips = labeled_clips(train_clips);
  const auto fold_of = folds_for(clips, routing.folds, train_config.rng_seed);

  // Band-filtered aggregate per clip; empty when no frame survives.
  const std::size_t n_bands = routing.quality_bands.size();
  std::vector<std::vector<std::optional<Embedding>>> features(n_bands);
  for (std::size_t b = 0; b < n_bands; ++b) {
    for (const auto& c : clips) {
      const auto kept = filter_by_quality(c.clip->frames, routing.quality_bands[b]);
      features[b].push_back(kept.empty() ? std::nullopt : std::optional(aggregate_clip(kept)));
    }
  }

  std::vector<Dataset> sets(n_bands * routing.folds);
  for (std::size_t b = 0; b < n_bands; ++b) {
    for (std::size_t f = 0; f < routing.folds; ++f) {
      auto& set = sets[b * routing.folds + f];
      for (std::size_t i = 0; i < clips.size(); ++i) {
        if (features[b][i] && in_training_fold(fold_of[i], f, routing.folds)) {
          set.features.push_back(*features[b][i]);
          set.labels.push_back(clips[i].label);
        }
      }
      if (set.features.empty()) {
        throw Error(ErrorKind::kEmptyBand, "no training clip keeps a frame with quality >= " +
                                               band_tag(routing.quality_bands[b]) + " (fold " +
                                               std::to_string(f) + ")");
      }
    }
  }

  std::vector<GridModel> models(sets.size());
  run_jobs(sets.size(), threads, [&](std::size_t cell) {
    const std::size_t b = cell / routing.folds;
    const std::size_t f = cell % routing.folds;
    models[cell] = fit(Part::kA, Modality::kFace, routing.quality_bands[b], f, sets[cell], num_classes,
                       train_config, cell);
  });
  return models;
}

std::vector<GridModel> train_part_b(std::span<const ClipRecord> train_clips, std::size_t num_classes,
                                    const RoutingConfig& routing, const TrainConfig& train_config,
                                    std::size_t threads, std::span<const Modality> modalities) {
  validate(routing);
  validate(train_config);
  const auto clips = labeled_clips(train_clips);
  const auto fold_of = folds_for(clips, routing.folds, train_config.rng_seed);

  std::vector<std::string> missing;
  std::vector<Dataset> sets(modalities.size() * routing.folds);
  for (std::size_t mi = 0; mi < modalities.size(); ++mi) {
    std::vector<std::optional<Embedding>> feats;
    bool any = false;
    for (const auto& c : clips) {
      feats.push_back(modality_feature(*c.clip, modalities[mi]));
      any = any || feats.back().has_value();
    }
    if (!any) {
      missing.emplace_back(to_string(modalities[mi]));
      continue;
    }
    for (std::size_t f = 0; f < routing.folds; ++f) {
      auto& set = sets[mi * routing.folds + f];
      for (std::size_t i = 0; i < clips.size(); ++i) {
        if (feats[i] && in_training_fold(fold_of[i], f, routing.folds)) {
          set.features.push_back(*feats[i]);
          set.labels.push_back(clips[i].label);
        }
      }
      if (set.features.empty()) {
        throw Error(ErrorKind::kEmptyTrainingSet, std::string(to_string(modalities[mi])) + " fold " +
                                                      std::to_string(f) + " has no training clips");
      }
    }
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    throw Error(ErrorKind::kMissingModality, "no training clip carries: " + names);
  }

  std::vector<GridModel> models(sets.size());
  run_jobs(sets.size(), threads, [&](std::size_t cell) {
    const std::size_t mi = cell / routing.folds;
    const std::size_t f = cell % routing.folds;
    // Part B cells use seeds disjoint from Part A's.
    models[cell] = fit(Part::kB, modalities[mi], 0.0, f, sets[cell], num_classes, train_config,
                       1000 + static_cast<std::uint64_t>(modalities[mi]) * 100 + f);
  });
  return models;
}

Matrix ensemble_probs(std::span<const MlpParams* const> models, const Matrix& features) {
  if (models.empty()) throw Error(ErrorKind::kEmptyModelSet, "ensemble needs at least one model");
  std::vector<Matrix> outputs;
  outputs.reserve(models.size());
  for (const MlpParams* m : models) outputs.push_back(predict_proba(*m, features));
  for (const auto& o : outputs) {
    if (o.cols() != outputs.front().cols()) {
      throw Error(ErrorKind::kDimensionMismatch, "ensemble members disagree on class count");
    }
  }
  Matrix mean(outputs.front().rows(), outputs.front().cols());
  std::vector<double> terms(outputs.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    for (std::size_t k = 0; k < outputs.size(); ++k) terms[k] = outputs[k].data()[i];
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    mean.data()[i] = s / static_cast<double>(terms.size());
  }
  return mean;
}

std::vector<double> ensemble_probs(std::span<const MlpParams* const> models, const Embedding& feature) {
  const Embedding* one = &feature;
  const Matrix probs = ensemble_probs(models, to_matrix(std::span<const Embedding>(one, 1)));
  return {probs.data(), probs.data() + probs.size()};
}

}  // namespace pidfuse
