#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pidfuse/aggregate.hpp"
#include "pidfuse/audio.hpp"
#include "pidfuse/eval.hpp"
#include "pidfuse/mlp.hpp"
#include "pidfuse/rankfusion.hpp"

using namespace pidfuse;

namespace {

std::vector<FrameObservation> frames(std::size_t n, std::size_t dim) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FrameObservation> out(n);
  for (auto& f : out) {
    f.embedding.resize(dim);
    for (auto& x : f.embedding) x = u(rng) - 0.5;
    f.quality_score = 200.0 * u(rng);
    f.detection_score = u(rng);
  }
  return out;
}

// `models` models, each with a full top-100 list for every label.
PredictionSet prediction_set(std::size_t models, std::size_t labels, std::size_t clips) {
  Rng rng(2);
  std::vector<std::string> pool;
  for (std::size_t c = 0; c < clips; ++c) pool.push_back("clip" + std::to_string(c));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PredictionSet set;
  for (std::size_t m = 0; m < models; ++m) {
    auto& per_label = set["m" + std::to_string(m)];
    for (std::size_t l = 0; l < labels; ++l) {
      std::shuffle(pool.begin(), pool.end(), rng);
      std::vector<std::pair<std::string, double>> cands;
      for (std::size_t i = 0; i < 100 && i < pool.size(); ++i) cands.push_back({pool[i], u(rng)});
      per_label[static_cast<int>(l)] = make_prediction_list(static_cast<int>(l), cands);
    }
  }
  return set;
}

}  // namespace

static void BM_AggregateClip(benchmark::State& state) {
  const auto f = frames(static_cast<std::size_t>(state.range(0)), 512);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_clip(f));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AggregateClip)->Arg(1)->Arg(8)->Arg(64);

static void BM_FuseAll(benchmark::State& state) {
  const auto labels = static_cast<std::size_t>(state.range(0));
  const auto set = prediction_set(3, labels, 2000);
  for (auto _ : state) benchmark::DoNotOptimize(fuse_all(set, labels));
}
BENCHMARK(BM_FuseAll)->Arg(50)->Arg(500);

static void BM_MlpForward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const MlpParams p = init_params({512, hidden, 1000}, rng);
  Matrix batch = Matrix::Random(64, 512);
  for (auto _ : state) benchmark::DoNotOptimize(predict_proba(p, batch));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_MlpForward)->Arg(128)->Arg(1024);

static void BM_TrainStep(benchmark::State& state) {
  Rng rng(4);
  const MlpParams p = init_params({64, 128, 50}, rng);
  const Matrix batch = Matrix::Random(32, 64);
  std::vector<int> labels(32);
  for (int i = 0; i < 32; ++i) labels[i] = i % 50;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(p, batch, labels, rng, 0.5));
}
BENCHMARK(BM_TrainStep);

static void BM_Spectrogram(benchmark::State& state) {
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = std::sin(0.05 * static_cast<double>(i));
  for (auto _ : state) benchmark::DoNotOptimize(spectrogram(w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Spectrogram)->Arg(16000)->Arg(160000);

static void BM_MeanAveragePrecision(benchmark::State& state) {
  const auto labels = static_cast<std::size_t>(state.range(0));
  const auto fused = fuse_all(prediction_set(1, labels, 2000), labels);
  GroundTruth truth;
  for (const auto& [label, list] : fused.lists) {
    for (std::size_t i = 0; i < list.size(); i += 7) truth.positives[label].insert(list[i].clip_id);
  }
  for (auto _ : state) benchmark::DoNotOptimize(mean_average_precision(fused, truth));
}
BENCHMARK(BM_MeanAveragePrecision)->Arg(50)->Arg(1000);
BENCHMARK_MAIN();
