#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pidfuse/eval.hpp"
#include "pidfuse/pipeline.hpp"
#include "pidfuse/types.hpp"

namespace pidfuse {

inline constexpr int kCorpusFormatVersion = 1;

enum class EmbeddingEncoding {
  kText,    // JSON number arrays
  kBase64,  // base64 of little-endian float64
};

// Sidecar "<corpus>.manifest.json".
struct CorpusManifest {
  int version = kCorpusFormatVersion;
  DimensionMap dims;
  std::size_t num_classes = 0;
  EmbeddingEncoding encoding = EmbeddingEncoding::kText;

  bool operator==(const CorpusManifest&) const = default;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<ClipRecord> clips;
};

std::filesystem::path manifest_path(const std::filesystem::path& corpus);

// One JSON object per line. Writing is canonical: reading a written corpus
// and writing it again reproduces the bytes.
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Throws kMalformedRecord (with the 1-based line number), kVersionMismatch,
// kIoFailure.
Corpus read_corpus(const std::filesystem::path& path);

// One line per label in ascending order: the label, then up to `cut` clip
// ids in rank order, space separated.
void write_retrieval(const std::filesystem::path& path, const RetrievalResult& result,
                     std::size_t cut = kDefaultRetrievalCut);

// Scores are not stored; re-read lists carry 1/rank as their score.
RetrievalResult read_retrieval(const std::filesystem::path& path);

// Same line layout as the retrieval file, listing each label's positives.
void write_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_truth(const std::filesystem::path& path);

// JSON lines: a header with the label count, then one line per
// (part, model, label) list.
void write_predictions(const std::filesystem::path& path, const StagePredictions& predictions);
StagePredictions read_predictions(const std::filesystem::path& path);

// Model grid directory: manifest.json plus one checkpoint per model.
// Loaded parameters carry checkpoint (float) precision.
void save_grid(const std::filesystem::path& dir, const ModelGrid& grid);
ModelGrid load_grid(const std::filesystem::path& dir);

struct MetricsReport {
  double map = 0.0;
  std::size_t cut = kDefaultRetrievalCut;
  std::vector<LabelAp> per_label;
  std::optional<double> map_part_a;
  std::optional<double> map_part_b;
  std::map<Modality, double> map_modality;
  std::optional<std::size_t> part_a_clips;
  std::optional<std::size_t> part_b_clips;
};

MetricsReport evaluate(const RetrievalResult& result, const GroundTruth& truth,
                       std::size_t cut = kDefaultRetrievalCut);
std::string to_json(const MetricsReport& report);
void write_report(const std::filesystem::path& path, const MetricsReport& report);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace pidfuse
