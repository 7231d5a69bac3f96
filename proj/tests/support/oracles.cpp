#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>

namespace pidfuse::oracle {

RetrievalResult brute_force_fuse(const PredictionSet& predictions, std::size_t num_labels,
                                 std::size_t k) {
  RetrievalResult out;
  for (std::size_t l = 0; l < num_labels; ++l) {
    const int label = static_cast<int>(l);
    std::vector<std::string> seen;
    for (const auto& [name, per_label] : predictions) {
      auto it = per_label.find(label);
      if (it == per_label.end()) continue;
      for (const auto& e : it->second.entries) {
        if (std::find(seen.begin(), seen.end(), e.clip_id) == seen.end()) seen.push_back(e.clip_id);
      }
    }
    std::vector<ScoredClip> fused;
    for (const auto& clip : seen) {
      double w = 0.0;
      for (const auto& [name, per_label] : predictions) {
        auto it = per_label.find(label);
        if (it == per_label.end()) continue;
        for (const auto& e : it->second.entries) {
          if (e.clip_id == clip) w += e.result_score / e.rank_score;
        }
      }
      fused.push_back({clip, w});
    }
    std::sort(fused.begin(), fused.end(), [](const ScoredClip& a, const ScoredClip& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.clip_id < b.clip_id;
    });
    if (fused.size() > k) fused.resize(k);
    out.lists[label] = std::move(fused);
  }
  return out;
}

double brute_force_map(const RetrievalResult& result, const GroundTruth& truth, std::size_t cut) {
  double total = 0.0;
  for (const auto& [label, positives] : truth.positives) {
    const auto& ranked = result.lists.at(label);
    const std::size_t depth = std::min(cut, ranked.size());
    double sum = 0.0;
    for (std::size_t j = 1; j <= positives.size(); ++j) {
      // Shortest prefix containing j positives.
      for (std::size_t len = 1; len <= depth; ++len) {
        std::size_t hits = 0;
        for (std::size_t t = 0; t < len; ++t) hits += positives.count(ranked[t].clip_id);
        if (hits == j) {
          sum += static_cast<double>(j) / static_cast<double>(len);
          break;
        }
      }
    }
    total += sum / static_cast<double>(positives.size());
  }
  return truth.positives.empty() ? 0.0 : total / static_cast<double>(truth.positives.size());
}

RetrievalInstance random_retrieval_instance(Rng& rng, std::size_t max_labels, std::size_t max_clips) {
  std::uniform_int_distribution<std::size_t> n_labels(1, max_labels);
  std::uniform_int_distribution<std::size_t> n_clips(1, max_clips);
  const std::size_t labels = n_labels(rng);
  const std::size_t clips = n_clips(rng);
  std::vector<std::string> pool;
  for (std::size_t c = 0; c < clips; ++c) pool.push_back("c" + std::to_string(c));

  RetrievalInstance inst;
  for (std::size_t l = 0; l < labels; ++l) {
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<std::size_t> n_pos(1, std::min<std::size_t>(clips, 10));
    auto& pos = inst.truth.positives[static_cast<int>(l)];
    const std::size_t m = n_pos(rng);
    for (std::size_t i = 0; i < m; ++i) pos.insert(pool[i]);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::uniform_int_distribution<std::size_t> len(0, clips);
    auto& list = inst.result.lists[static_cast<int>(l)];
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) list.push_back({pool[i], 1.0 / static_cast<double>(i + 1)});
  }
  return inst;
}

namespace {

std::vector<std::string> pick(Rng& rng, std::span<const std::string> pool, std::size_t max_len) {
  std::vector<std::string> ids(pool.begin(), pool.end());
  std::shuffle(ids.begin(), ids.end(), rng);
  std::uniform_int_distribution<std::size_t> len(0, std::min(max_len, ids.size()));
  ids.resize(len(rng));
  return ids;
}

}  // namespace

PredictionList random_dyadic_list(Rng& rng, int label, std::span<const std::string> pool,
                                  std::size_t max_len) {
  constexpr std::int64_t kScale = std::int64_t{1} << 20;
  const auto ids = pick(rng, pool, max_len);
  std::bernoulli_distribution coarse(0.5);
  const bool coarse_grid = coarse(rng);
  PredictionList list;
  list.label = label;
  std::int64_t prev = kScale;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int64_t r = static_cast<std::int64_t>(i + 1);
    std::int64_t draw;
    if (coarse_grid) {
      // Few distinct levels, so equal W values (ties) are common.
      std::uniform_int_distribution<std::int64_t> level(0, 4);
      draw = level(rng) * (kScale / 4);
    } else {
      std::uniform_int_distribution<std::int64_t> any(0, kScale);
      draw = any(rng);
    }
    // Numerator is a multiple of the rank, so score / rank is exact.
    const std::int64_t n = (std::min(prev, draw) / r) * r;
    prev = n;
    list.entries.push_back({ids[i], static_cast<double>(n) / static_cast<double>(kScale),
                            static_cast<int>(r)});
  }
  return list;
}

PredictionList random_real_list(Rng& rng, int label, std::span<const std::string> pool,
                                std::size_t max_len) {
  const auto ids = pick(rng, pool, max_len);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(ids.size());
  for (auto& s : scores) s = u(rng);
  std::sort(scores.begin(), scores.end(), std::greater<>());
  PredictionList list;
  list.label = label;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    list.entries.push_back({ids[i], scores[i], static_cast<int>(i + 1)});
  }
  return list;
}

PredictionSet random_prediction_set(Rng& rng, std::size_t models, std::size_t labels,
                                    std::size_t clips, bool dyadic) {
  std::vector<std::string> pool;
  for (std::size_t c = 0; c < clips; ++c) pool.push_back("v" + std::to_string(1000 + c));
  std::bernoulli_distribution skip(0.2);
  PredictionSet set;
  for (std::size_t m = 0; m < models; ++m) {
    auto& per_label = set["model" + std::to_string(m)];
    for (std::size_t l = 0; l < labels; ++l) {
      if (skip(rng)) continue;
      const int label = static_cast<int>(l);
      per_label[label] = dyadic ? random_dyadic_list(rng, label, pool, kPredictionListCap)
                                : random_real_list(rng, label, pool, kPredictionListCap);
    }
  }
  return set;
}

std::vector<double> naive_dft_magnitudes(std::span<const double> frame, std::size_t n_fft,
                                         std::size_t bins) {
  std::vector<double> mags(bins);
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  for (std::size_t k = 0; k < bins; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t n = 0; n < frame.size() && n < n_fft; ++n) {
      const long double angle = two_pi * static_cast<long double>((k * n) % n_fft) /
                                static_cast<long double>(n_fft);
      re += frame[n] * std::cos(angle);
      im -= frame[n] * std::sin(angle);
    }
    mags[k] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return mags;
}

std::vector<double> windowed_frame(std::span<const double> samples, std::size_t offset) {
  constexpr std::size_t kWidth = 400;
  std::vector<double> out(kWidth);
  for (std::size_t n = 0; n < kWidth; ++n) {
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / kWidth);
    out[n] = samples[offset + n] * w;
  }
  return out;
}

GradCheck check_gradients(const MlpParams& params, const Matrix& batch, std::span<const int> labels,
                          const DropoutMasks& masks, double h, double rel_tol, double abs_tol) {
  GradCheck report;
  const auto analytic = loss_and_grad(params, batch, labels, masks).grads;
  MlpParams probe = params;
  auto tensors = trainable_tensors(probe);
  for (std::size_t t = 0; t < kTrainableCount; ++t) {
    Matrix& m = *tensors[t];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = loss_and_grad(probe, batch, labels, masks).loss;
      m.data()[i] = saved - h;
      const double down = loss_and_grad(probe, batch, labels, masks).loss;
      m.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t].data()[i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), 1e-300});
      ++report.checked;
      if (abs_err > abs_tol && rel_err > rel_tol) ++report.violations;
      if (abs_err > abs_tol && rel_err > report.worst_rel) {
        report.worst_rel = rel_err;
        report.worst_tensor = std::string(kTrainableNames[t]);
      }
      report.worst_abs = std::max(report.worst_abs, abs_err);
    }
  }
  return report;
}

DropoutMasks unit_masks(std::size_t batch, std::size_t hidden) {
  const auto rows = static_cast<Eigen::Index>(batch);
  const auto cols = static_cast<Eigen::Index>(hidden);
  return {Matrix::Ones(rows, cols), Matrix::Ones(rows, cols)};
}

ToySet make_toy_set(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.5);
  const double centers[3][4] = {{3, 0, 0, 0}, {0, 3, 0, 0}, {0, 0, 3, 0}};
  ToySet toy;
  toy.features.resize(300, 4);
  for (int i = 0; i < 300; ++i) {
    const int c = i % 3;
    for (int d = 0; d < 4; ++d) toy.features(i, d) = centers[c][d] + noise(rng);
    toy.labels.push_back(c);
  }
  return toy;
}

double nearest_centroid_accuracy(const Matrix& features, std::span<const int> labels,
                                 std::size_t classes) {
  const auto dim = features.cols();
  Matrix centroid = Matrix::Zero(static_cast<Eigen::Index>(classes), dim);
  std::vector<double> count(classes, 0.0);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    centroid.row(labels[i]) += features.row(i);
    count[labels[i]] += 1.0;
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (count[c] > 0) centroid.row(static_cast<Eigen::Index>(c)) /= count[c];
  }
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroid.rows(); ++c) {
      const double d = (features.row(i) - centroid.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.rows());
}

std::vector<FrameObservation> random_frames(Rng& rng, std::size_t dim, std::size_t max_frames) {
  std::uniform_int_distribution<std::size_t> count(1, max_frames);
  std::uniform_real_distribution<double> q(0.01, 200.0);
  std::uniform_real_distribution<double> d(0.01, 1.0);
  std::uniform_real_distribution<double> v(-10.0, 10.0);
  std::vector<FrameObservation> frames(count(rng));
  for (auto& f : frames) {
    f.embedding.resize(dim);
    for (auto& x : f.embedding) x = v(rng);
    f.quality_score = q(rng);
    f.detection_score = d(rng);
  }
  return frames;
}

}  // namespace pidfuse::oracle
