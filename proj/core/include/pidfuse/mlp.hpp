#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pidfuse/matrix.hpp"
#include "pidfuse/rng.hpp"
#include "pidfuse/types.hpp"

namespace pidfuse {

// Three fully connected layers: in -> hidden -> hidden -> classes.
struct MlpShape {
  std::size_t input_dim = 512;
  std::size_t hidden_dim = 1024;
  std::size_t num_classes = 10035;

  bool operator==(const MlpShape&) const = default;
};

// Batch normalization over one hidden layer. All members are 1 x hidden.
struct BatchNorm {
  Matrix gamma;
  Matrix beta;
  Matrix running_mean;
  Matrix running_var;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct MlpParams {
  Matrix w1;  // input x hidden
  Matrix b1;  // 1 x hidden
  BatchNorm bn1;
  Matrix w2;  // hidden x hidden
  Matrix b2;
  BatchNorm bn2;
  Matrix w3;  // hidden x classes
  Matrix b3;  // 1 x classes

  MlpShape shape() const;
};

bool operator==(const MlpParams& a, const MlpParams& b);

// The ten trainable tensors, in declaration order.
inline constexpr std::size_t kTrainableCount = 10;
inline constexpr std::array<std::string_view, kTrainableCount> kTrainableNames = {
    "w1", "b1", "bn1.gamma", "bn1.beta", "w2", "b2", "bn2.gamma", "bn2.beta", "w3", "b3"};

std::array<Matrix*, kTrainableCount> trainable_tensors(MlpParams& params);
std::array<const Matrix*, kTrainableCount> trainable_tensors(const MlpParams& params);

using Gradients = std::array<Matrix, kTrainableCount>;

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, BN scale 1 and
// shift 0, running mean 0 and running variance 1.
MlpParams init_params(const MlpShape& shape, Rng& rng);

// All weights and biases zero; BN as in init_params.
MlpParams zero_params(const MlpShape& shape);

enum class Mode { kTrain, kInfer };

// Per-layer inverted-dropout masks; entries are 0 or 1 / keep_prob.
struct DropoutMasks {
  Matrix layer1;
  Matrix layer2;
};

DropoutMasks sample_dropout_masks(std::size_t batch_size, std::size_t hidden_dim, double keep_prob,
                                  Rng& rng);

// Class probabilities (B x classes). Infer mode uses running BN statistics
// and no dropout; train mode uses batch statistics and draws dropout masks
// from `rng`. Throws kDimensionMismatch, kNonFiniteInput.
Matrix forward(const MlpParams& params, const Matrix& batch, Mode mode, Rng& rng,
               double keep_prob = 0.5);

// Infer-mode convenience overload.
Matrix predict_proba(const MlpParams& params, const Matrix& batch);

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
  // Batch mean and biased variance of each BN input, for running-stat updates.
  Matrix bn1_batch_mean, bn1_batch_var, bn2_batch_mean, bn2_batch_var;
};

// Mean softmax cross-entropy over the batch and its exact gradient for the
// train-mode graph under the given dropout masks.
// Throws kLabelOutOfRange, kDimensionMismatch, kNonFiniteInput.
LossAndGrad loss_and_grad(const MlpParams& params, const Matrix& batch, std::span<const int> labels,
                          const DropoutMasks& masks);

// Draws fresh masks from `rng` and delegates to the overload above.
LossAndGrad loss_and_grad(const MlpParams& params, const Matrix& batch, std::span<const int> labels,
                          Rng& rng, double keep_prob);

struct TrainConfig {
  double learning_rate = 0.0008;
  std::size_t batch_size = 512;
  double dropout_keep_prob = 0.5;
  std::size_t epochs = 30;
  std::size_t hidden_dim = 1024;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t rng_seed = 0;
};

// Throws kInvalidConfig when an invariant is violated.
void validate(const TrainConfig& config);

struct TrainResult {
  MlpParams params;
  std::vector<double> epoch_loss;  // mean training loss of each epoch
};

// Adam with bias correction, per-epoch shuffling, BN running statistics
// updated with momentum kBatchNormMomentum. Rows of `features` are examples.
// Throws kEmptyTrainingSet, kLabelOutOfRange, kInvalidConfig.
TrainResult train(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                  const TrainConfig& config);

// Classification accuracy in infer mode.
double accuracy(const MlpParams& params, const Matrix& features, std::span<const int> labels);

// The k most probable labels, ties broken by the lower label index.
// Throws kDimensionMismatch, kInvalidConfig (k > classes).
std::vector<std::pair<int, double>> predict_top_k(const MlpParams& params, const Embedding& feature,
                                                  std::size_t k);

// Copies embeddings into the rows of a matrix. Throws kDimensionMismatch.
Matrix to_matrix(std::span<const Embedding> rows);

// Versioned little-endian float32 checkpoint: magic, version, dims, then the
// tensors in declaration order. Reading yields the float-rounded values, so
// write -> read -> write is byte-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(const MlpParams& params, std::ostream& out);
MlpParams read_checkpoint(std::istream& in);
void save_checkpoint(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_checkpoint(const std::filesystem::path& path);

// Rounds every tensor to float precision, matching what a checkpoint keeps.
MlpParams round_to_checkpoint_precision(MlpParams params);

}  // namespace pidfuse
