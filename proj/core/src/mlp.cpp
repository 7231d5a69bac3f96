#include "pidfuse/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "pidfuse/error.hpp"

namespace pidfuse {
namespace {

Matrix row_of(std::size_t n, double value) { return Matrix::Constant(1, static_cast<Eigen::Index>(n), value); }

BatchNorm fresh_batch_norm(std::size_t n) {
  return {row_of(n, 1.0), row_of(n, 0.0), row_of(n, 0.0), row_of(n, 1.0)};
}

void check_input(const MlpParams& params, const Matrix& batch) {
  if (batch.rows() < 1) throw Error(ErrorKind::kDimensionMismatch, "batch has no rows");
  if (batch.cols() != params.w1.rows()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                    std::to_string(params.w1.rows()));
  }
  if (!batch.allFinite()) throw Error(ErrorKind::kNonFiniteInput, "batch contains NaN or Inf");
}

void softmax_rows(Matrix& logits) {
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    row.array() -= row.maxCoeff();
    // std::exp rather than Eigen's vectorized exp, which clamps large negative
    // inputs and never returns an exact zero.
    row = row.unaryExpr([](double v) { return std::exp(v); });
    row /= row.sum();
  }
}

Matrix colsum(const Matrix& m) { return m.colwise().sum(); }

// One hidden block in train mode: FC -> BN (batch statistics) -> ReLU -> dropout.
struct HiddenTrace {
  Matrix xhat;     // normalized pre-activation
  Matrix inv_std;  // 1 x h
  Matrix pre_relu; // BN output
  Matrix out;      // after ReLU and dropout
  Matrix mean;     // 1 x h
  Matrix var;      // 1 x h, biased
};

HiddenTrace hidden_train(const Matrix& in, const Matrix& w, const Matrix& b, const BatchNorm& bn,
                         const Matrix& mask) {
  HiddenTrace t;
  Matrix z = in * w;
  z.rowwise() += b.row(0);
  const double n = static_cast<double>(z.rows());
  t.mean = colsum(z) / n;
  Matrix centered = z.rowwise() - t.mean.row(0);
  t.var = colsum(centered.array().square().matrix()) / n;
  t.inv_std = (t.var.array() + kBatchNormEpsilon).rsqrt().matrix();
  t.xhat = centered.array().rowwise() * t.inv_std.row(0).array();
  t.pre_relu = (t.xhat.array().rowwise() * bn.gamma.row(0).array()).rowwise() + bn.beta.row(0).array();
  t.out = t.pre_relu.cwiseMax(0.0).cwiseProduct(mask);
  return t;
}

Matrix hidden_infer(const Matrix& in, const Matrix& w, const Matrix& b, const BatchNorm& bn) {
  Matrix z = in * w;
  z.rowwise() += b.row(0);
  const Matrix scale =
      (bn.gamma.array() * (bn.running_var.array() + kBatchNormEpsilon).rsqrt()).matrix();
  Matrix y = ((z.rowwise() - bn.running_mean.row(0)).array().rowwise() * scale.row(0).array())
                 .rowwise() + bn.beta.row(0).array();
  return y.cwiseMax(0.0);
}

// Back-propagates through dropout, ReLU and batch-statistics BN. Returns the
// gradient with respect to the FC output and fills dgamma / dbeta.
Matrix hidden_backward(const HiddenTrace& t, const Matrix& mask, const BatchNorm& bn,
                       const Matrix& dout, Matrix& dgamma, Matrix& dbeta) {
  const double n = static_cast<double>(dout.rows());
  Matrix dy = dout.cwiseProduct(mask);
  dy = (t.pre_relu.array() > 0.0).select(dy, 0.0);
  dgamma = colsum(dy.cwiseProduct(t.xhat));
  dbeta = colsum(dy);
  Matrix dxhat = dy.array().rowwise() * bn.gamma.row(0).array();
  const Matrix sum_dxhat = colsum(dxhat);
  const Matrix sum_dxhat_xhat = colsum(dxhat.cwiseProduct(t.xhat));
  Matrix dz = (n * dxhat.array()).rowwise() - sum_dxhat.row(0).array();
  dz.array() -= t.xhat.array().rowwise() * sum_dxhat_xhat.row(0).array();
  dz.array().rowwise() *= (t.inv_std.array() / n).row(0);
  return dz;
}

void check_labels(std::span<const int> labels, Eigen::Index rows, std::size_t num_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw Error(ErrorKind::kDimensionMismatch, "got " + std::to_string(labels.size()) +
                                                   " labels for " + std::to_string(rows) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
      throw Error(ErrorKind::kLabelOutOfRange, "label " + std::to_string(l) + " outside [0, " +
                                                   std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

MlpShape MlpParams::shape() const {
  return {static_cast<std::size_t>(w1.rows()), static_cast<std::size_t>(w1.cols()),
          static_cast<std::size_t>(w3.cols())};
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  auto same = [](const Matrix& x, const Matrix& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  auto same_bn = [&](const BatchNorm& x, const BatchNorm& y) {
    return same(x.gamma, y.gamma) && same(x.beta, y.beta) && same(x.running_mean, y.running_mean) &&
           same(x.running_var, y.running_var);
  };
  return same(a.w1, b.w1) && same(a.b1, b.b1) && same_bn(a.bn1, b.bn1) && same(a.w2, b.w2) &&
         same(a.b2, b.b2) && same_bn(a.bn2, b.bn2) && same(a.w3, b.w3) && same(a.b3, b.b3);
}

std::array<Matrix*, kTrainableCount> trainable_tensors(MlpParams& p) {
  return {&p.w1, &p.b1, &p.bn1.gamma, &p.bn1.beta, &p.w2, &p.b2, &p.bn2.gamma, &p.bn2.beta, &p.w3, &p.b3};
}

std::array<const Matrix*, kTrainableCount> trainable_tensors(const MlpParams& p) {
  return {&p.w1, &p.b1, &p.bn1.gamma, &p.bn1.beta, &p.w2, &p.b2, &p.bn2.gamma, &p.bn2.beta, &p.w3, &p.b3};
}

MlpParams zero_params(const MlpShape& s) {
  if (s.input_dim == 0 || s.hidden_dim == 0 || s.num_classes < 2) {
    throw Error(ErrorKind::kInvalidConfig, "MLP needs positive dims and at least 2 classes");
  }
  const auto in = static_cast<Eigen::Index>(s.input_dim);
  const auto h = static_cast<Eigen::Index>(s.hidden_dim);
  const auto c = static_cast<Eigen::Index>(s.num_classes);
  MlpParams p;
  p.w1 = Matrix::Zero(in, h);
  p.b1 = Matrix::Zero(1, h);
  p.bn1 = fresh_batch_norm(s.hidden_dim);
  p.w2 = Matrix::Zero(h, h);
  p.b2 = Matrix::Zero(1, h);
  p.bn2 = fresh_batch_norm(s.hidden_dim);
  p.w3 = Matrix::Zero(h, c);
  p.b3 = Matrix::Zero(1, c);
  return p;
}

MlpParams init_params(const MlpShape& shape, Rng& rng) {
  MlpParams p = zero_params(shape);
  auto fill = [&rng](Matrix& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  };
  fill(p.w1);
  fill(p.w2);
  fill(p.w3);
  return p;
}

DropoutMasks sample_dropout_masks(std::size_t batch_size, std::size_t hidden_dim, double keep_prob,
                                  Rng& rng) {
  const auto b = static_cast<Eigen::Index>(batch_size);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  DropoutMasks masks{Matrix::Ones(b, h), Matrix::Ones(b, h)};
  if (keep_prob >= 1.0) return masks;
  std::bernoulli_distribution keep(keep_prob);
  const double scale = 1.0 / keep_prob;
  for (Matrix* m : {&masks.layer1, &masks.layer2}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = keep(rng) ? scale : 0.0;
  }
  return masks;
}

Matrix forward(const MlpParams& params, const Matrix& batch, Mode mode, Rng& rng, double keep_prob) {
  check_input(params, batch);
  Matrix logits;
  if (mode == Mode::kInfer) {
    const Matrix h1 = hidden_infer(batch, params.w1, params.b1, params.bn1);
    const Matrix h2 = hidden_infer(h1, params.w2, params.b2, params.bn2);
    logits = h2 * params.w3;
  } else {
    const auto masks = sample_dropout_masks(static_cast<std::size_t>(batch.rows()),
                                            static_cast<std::size_t>(params.w1.cols()), keep_prob, rng);
    const auto t1 = hidden_train(batch, params.w1, params.b1, params.bn1, masks.layer1);
    const auto t2 = hidden_train(t1.out, params.w2, params.b2, params.bn2, masks.layer2);
    logits = t2.out * params.w3;
  }
  logits.rowwise() += params.b3.row(0);
  softmax_rows(logits);
  return logits;
}

Matrix predict_proba(const MlpParams& params, const Matrix& batch) {
  Rng unused(0);
  return forward(params, batch, Mode::kInfer, unused);
}

LossAndGrad loss_and_grad(const MlpParams& params, const Matrix& batch, std::span<const int> labels,
                          const DropoutMasks& masks) {
  check_input(params, batch);
  const std::size_t classes = static_cast<std::size_t>(params.w3.cols());
  check_labels(labels, batch.rows(), classes);
  if (masks.layer1.rows() != batch.rows() || masks.layer1.cols() != params.w1.cols() ||
      masks.layer2.rows() != batch.rows() || masks.layer2.cols() != params.w2.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "dropout masks do not match the batch");
  }

  const auto t1 = hidden_train(batch, params.w1, params.b1, params.bn1, masks.layer1);
  const auto t2 = hidden_train(t1.out, params.w2, params.b2, params.bn2, masks.layer2);
  Matrix probs = t2.out * params.w3;
  probs.rowwise() += params.b3.row(0);
  softmax_rows(probs);

  const double n = static_cast<double>(batch.rows());
  LossAndGrad r;
  double loss = 0.0;
  Matrix dlogits = probs;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    // Clamp keeps log finite when a probability underflows to zero.
    loss -= std::log(std::max(probs(i, l), std::numeric_limits<double>::min()));
    dlogits(i, l) -= 1.0;
  }
  r.loss = loss / n;
  dlogits /= n;

  auto& g = r.grads;
  g[8] = t2.out.transpose() * dlogits;
  g[9] = colsum(dlogits);
  const Matrix dh2 = dlogits * params.w3.transpose();
  const Matrix dz2 = hidden_backward(t2, masks.layer2, params.bn2, dh2, g[6], g[7]);
  g[4] = t1.out.transpose() * dz2;
  g[5] = colsum(dz2);
  const Matrix dh1 = dz2 * params.w2.transpose();
  const Matrix dz1 = hidden_backward(t1, masks.layer1, params.bn1, dh1, g[2], g[3]);
  g[0] = batch.transpose() * dz1;
  g[1] = colsum(dz1);

  r.bn1_batch_mean = t1.mean;
  r.bn1_batch_var = t1.var;
  r.bn2_batch_mean = t2.mean;
  r.bn2_batch_var = t2.var;
  return r;
}

LossAndGrad loss_and_grad(const MlpParams& params, const Matrix& batch, std::span<const int> labels,
                          Rng& rng, double keep_prob) {
  const auto masks = sample_dropout_masks(static_cast<std::size_t>(batch.rows()),
                                          static_cast<std::size_t>(params.w1.cols()), keep_prob, rng);
  return loss_and_grad(params, batch, labels, masks);
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); };
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) fail("learning_rate must be >= 0");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (!(c.dropout_keep_prob > 0.0 && c.dropout_keep_prob <= 1.0)) fail("dropout_keep_prob must lie in (0, 1]");
  if (c.epochs == 0) fail("epochs must be positive");
  if (c.hidden_dim == 0) fail("hidden_dim must be positive");
  if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) fail("adam_beta1 must lie in [0, 1)");
  if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) fail("adam_beta2 must lie in [0, 1)");
  if (!(c.adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
}

TrainResult train(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                  const TrainConfig& config) {
  validate(config);
  if (features.rows() == 0) throw Error(ErrorKind::kEmptyTrainingSet, "no training examples");
  if (!features.allFinite()) throw Error(ErrorKind::kNonFiniteInput, "features contain NaN or Inf");
  check_labels(labels, features.rows(), num_classes);

  Rng rng(config.rng_seed);
  TrainResult result;
  MlpParams& params = result.params;
  params = init_params({static_cast<std::size_t>(features.cols()), config.hidden_dim, num_classes}, rng);

  Gradients m, v;
  {
    auto tensors = trainable_tensors(params);
    for (std::size_t i = 0; i < kTrainableCount; ++i) {
      m[i] = Matrix::Zero(tensors[i]->rows(), tensors[i]->cols());
      v[i] = m[i];
    }
  }

  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t step = 0;
  const double momentum = kBatchNormMomentum;

  auto update_running = [momentum](BatchNorm& bn, const Matrix& mean, const Matrix& var, double b) {
    const double unbias = b > 1.0 ? b / (b - 1.0) : 1.0;
    bn.running_mean = momentum * bn.running_mean + (1.0 - momentum) * mean;
    bn.running_var = momentum * bn.running_var + (1.0 - momentum) * unbias * var;
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - start);
      Matrix xb(rows, features.cols());
      std::vector<int> lb(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = features.row(static_cast<Eigen::Index>(order[i]));
        lb[i - start] = labels[order[i]];
      }
      const auto lg = loss_and_grad(params, xb, lb, rng, config.dropout_keep_prob);
      epoch_loss += lg.loss * static_cast<double>(rows);

      ++step;
      const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      auto tensors = trainable_tensors(params);
      for (std::size_t k = 0; k < kTrainableCount; ++k) {
        m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * lg.grads[k];
        v[k] = config.adam_beta2 * v[k] + (1.0 - config.adam_beta2) * lg.grads[k].cwiseAbs2();
        tensors[k]->array() -= config.learning_rate * (m[k].array() / c1) /
                               ((v[k].array() / c2).sqrt() + config.adam_epsilon);
      }
      update_running(params.bn1, lg.bn1_batch_mean, lg.bn1_batch_var, static_cast<double>(rows));
      update_running(params.bn2, lg.bn2_batch_mean, lg.bn2_batch_var, static_cast<double>(rows));
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

double accuracy(const MlpParams& params, const Matrix& features, std::span<const int> labels) {
  if (features.rows() == 0) return 0.0;
  const Matrix probs = predict_proba(params, features);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    probs.row(i).maxCoeff(&best);
    if (best == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

std::vector<std::pair<int, double>> predict_top_k(const MlpParams& params, const Embedding& feature,
                                                  std::size_t k) {
  const std::size_t classes = static_cast<std::size_t>(params.w3.cols());
  if (k > classes) {
    throw Error(ErrorKind::kInvalidConfig,
                "k=" + std::to_string(k) + " exceeds " + std::to_string(classes) + " classes");
  }
  const Embedding* one = &feature;
  const Matrix probs = predict_proba(params, to_matrix(std::span<const Embedding>(one, 1)));
  std::vector<int> idx(classes);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](int a, int b) {
                      if (probs(0, a) != probs(0, b)) return probs(0, a) > probs(0, b);
                      return a < b;
                    });
  std::vector<std::pair<int, double>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(idx[i], probs(0, idx[i]));
  return out;
}

Matrix to_matrix(std::span<const Embedding> rows) {
  if (rows.empty()) return Matrix(0, 0);
  const std::size_t dim = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "row " + std::to_string(i) + " has dim " +
                                                     std::to_string(rows[i].size()) + ", expected " +
                                                     std::to_string(dim));
    }
    for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

// --- checkpoint -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'P', 'I', 'D', 'F', 'M', 'L', 'P', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                         static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw Error(ErrorKind::kMalformedRecord, "checkpoint is truncated");
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <class P>
auto all_tensors(P& p) {
  return std::array{&p.w1, &p.b1, &p.bn1.gamma, &p.bn1.beta, &p.bn1.running_mean, &p.bn1.running_var,
          &p.w2, &p.b2, &p.bn2.gamma, &p.bn2.beta, &p.bn2.running_mean, &p.bn2.running_var,
          &p.w3, &p.b3};
}

}  // namespace

void write_checkpoint(const MlpParams& params, std::ostream& out) {
  const MlpShape s = params.shape();
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(s.input_dim));
  put_u32(out, static_cast<std::uint32_t>(s.hidden_dim));
  put_u32(out, static_cast<std::uint32_t>(s.num_classes));
  for (const Matrix* t : all_tensors(params)) {
    for (Eigen::Index i = 0; i < t->size(); ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t->data()[i])));
    }
  }
  if (!out) throw Error(ErrorKind::kIoFailure, "failed writing checkpoint");
}

MlpParams read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + 8, kMagic)) {
    throw Error(ErrorKind::kMalformedRecord, "not a pidfuse MLP checkpoint");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kVersionMismatch, "checkpoint version " + std::to_string(version) +
                                                 ", expected " + std::to_string(kCheckpointVersion));
  }
  MlpShape s;
  s.input_dim = get_u32(in);
  s.hidden_dim = get_u32(in);
  s.num_classes = get_u32(in);
  MlpParams p = zero_params(s);
  for (Matrix* t : all_tensors(p)) {
    for (Eigen::Index i = 0; i < t->size(); ++i) {
      t->data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(in)));
    }
    if (!t->allFinite()) throw Error(ErrorKind::kMalformedRecord, "checkpoint has non-finite values");
  }
  if ((p.bn1.running_var.array() <= 0.0).any() || (p.bn2.running_var.array() <= 0.0).any()) {
    throw Error(ErrorKind::kMalformedRecord, "checkpoint has non-positive running variance");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::kMalformedRecord, "trailing bytes after checkpoint tensors");
  }
  return p;
}

void save_checkpoint(const MlpParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string() + " for writing");
  write_checkpoint(params, out);
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  return read_checkpoint(in);
}

MlpParams round_to_checkpoint_precision(MlpParams params) {
  for (Matrix* t : all_tensors(params)) {
    for (Eigen::Index i = 0; i < t->size(); ++i) {
      t->data()[i] = static_cast<double>(static_cast<float>(t->data()[i]));
    }
  }
  return params;
}

}  // namespace pidfuse
