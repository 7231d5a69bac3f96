#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pidfuse/eval.hpp"
#include "pidfuse/matrix.hpp"
#include "pidfuse/mlp.hpp"
#include "pidfuse/rankfusion.hpp"
#include "pidfuse/rng.hpp"
#include "pidfuse/types.hpp"

namespace pidfuse::oracle {

// W per clip by scanning every model's list for it, then a plain sort.
RetrievalResult brute_force_fuse(const PredictionSet& predictions, std::size_t num_labels,
                                 std::size_t k);

// MAP by locating each R_{i,j} as the shortest prefix holding j positives
// and counting its length.
double brute_force_map(const RetrievalResult& result, const GroundTruth& truth, std::size_t cut);

struct RetrievalInstance {
  RetrievalResult result;
  GroundTruth truth;
};

// Up to `max_labels` labels over a pool of up to `max_clips` clips. Each
// label gets 1..n positives and a random ranking of part of the pool.
RetrievalInstance random_retrieval_instance(Rng& rng, std::size_t max_labels, std::size_t max_clips);

// A valid list whose result_score / rank_score terms are all multiples of
// 2^-20, so any summation order gives identical doubles.
PredictionList random_dyadic_list(Rng& rng, int label, std::span<const std::string> pool,
                                  std::size_t max_len);

// A valid list with arbitrary real scores.
PredictionList random_real_list(Rng& rng, int label, std::span<const std::string> pool,
                                std::size_t max_len);

PredictionSet random_prediction_set(Rng& rng, std::size_t models, std::size_t labels,
                                    std::size_t clips, bool dyadic);

// Magnitudes of the 512-point DFT of a zero-padded frame, bins 0..256, by
// direct summation in long double.
std::vector<double> naive_dft_magnitudes(std::span<const double> frame, std::size_t n_fft,
                                         std::size_t bins);

// Hamming-windowed copy of samples[offset, offset + 400).
std::vector<double> windowed_frame(std::span<const double> samples, std::size_t offset);

struct GradCheck {
  double worst_abs = 0.0;
  double worst_rel = 0.0;
  std::size_t checked = 0;
  std::size_t violations = 0;  // entries outside both tolerances
  std::string worst_tensor;
};

// Central differences of the train-mode loss under frozen masks against
// loss_and_grad, entry by entry over every trainable tensor. An entry passes
// when it is within abs_tol or within rel_tol relative.
GradCheck check_gradients(const MlpParams& params, const Matrix& batch, std::span<const int> labels,
                          const DropoutMasks& masks, double h, double rel_tol, double abs_tol);

DropoutMasks unit_masks(std::size_t batch, std::size_t hidden);

struct ToySet {
  Matrix features;
  std::vector<int> labels;
};

// Three Gaussian blobs in 4 dimensions, 100 points each.
ToySet make_toy_set(std::uint64_t seed);

// Training-set accuracy of the nearest class centroid.
double nearest_centroid_accuracy(const Matrix& features, std::span<const int> labels,
                                 std::size_t classes);

// Random frames with positive weights, 1..max_frames of them.
std::vector<FrameObservation> random_frames(Rng& rng, std::size_t dim, std::size_t max_frames);

}  // namespace pidfuse::oracle
