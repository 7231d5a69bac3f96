#include "pidfuse/io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pidfuse/error.hpp"

namespace pidfuse {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kCorpusFormat = "pidfuse-corpus";
constexpr std::string_view kPredictionFormat = "pidfuse-predictions";
constexpr std::string_view kGridFormat = "pidfuse-models";
constexpr int kPredictionVersion = 1;
constexpr int kGridVersion = 1;

constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
    out += kBase64Alphabet[(triple >> 18) & 0x3F];
    out += kBase64Alphabet[(triple >> 12) & 0x3F];
    out += i + 1 < bytes.size() ? kBase64Alphabet[(triple >> 6) & 0x3F] : '=';
    out += i + 2 < bytes.size() ? kBase64Alphabet[triple & 0x3F] : '=';
  }
  return out;
}

std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) return std::nullopt;
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < kBase64Alphabet.size(); ++i) {
    lookup[static_cast<unsigned char>(kBase64Alphabet[i])] = static_cast<int>(i);
  }
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t triple = 0;
    int pad = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=' && i + 4 == text.size() && j >= 2) {
        ++pad;
        triple <<= 6;
        continue;
      }
      const int v = lookup[static_cast<unsigned char>(c)];
      if (v < 0 || pad > 0) return std::nullopt;
      triple = (triple << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(triple >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((triple >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(triple & 0xFF));
  }
  return out;
}

Json encode_embedding(const Embedding& e, EmbeddingEncoding enc) {
  if (enc == EmbeddingEncoding::kText) return Json(e);
  std::vector<std::uint8_t> bytes;
  bytes.reserve(e.size() * 8);
  for (double v : e) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF));
  }
  return base64_encode(bytes);
}

Embedding decode_embedding(const Json& j, EmbeddingEncoding enc) {
  if (enc == EmbeddingEncoding::kText) {
    if (!j.is_array()) throw std::invalid_argument("embedding must be a number array");
    Embedding e;
    e.reserve(j.size());
    for (const auto& v : j) {
      if (!v.is_number()) throw std::invalid_argument("embedding entries must be numbers");
      e.push_back(v.get<double>());
    }
    return e;
  }
  if (!j.is_string()) throw std::invalid_argument("embedding must be a base64 string");
  const auto bytes = base64_decode(j.get<std::string>());
  if (!bytes || bytes->size() % 8 != 0) throw std::invalid_argument("embedding is not valid base64 float64 data");
  Embedding e(bytes->size() / 8);
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>((*bytes)[i * 8 + b]) << (8 * b);
    e[i] = std::bit_cast<double>(bits);
  }
  return e;
}

std::string_view encoding_name(EmbeddingEncoding e) {
  return e == EmbeddingEncoding::kText ? "text" : "base64";
}

Json dims_to_json(const DimensionMap& dims) {
  Json j = Json::object();
  for (const auto& [m, d] : dims) j[std::string(to_string(m))] = d;
  return j;
}

DimensionMap dims_from_json(const Json& j) {
  DimensionMap dims;
  for (const auto& [name, d] : j.items()) dims[parse_modality(name)] = d.get<std::size_t>();
  return dims;
}

Json clip_to_json(const ClipRecord& clip, EmbeddingEncoding enc) {
  Json j;
  j["clip_id"] = clip.clip_id;
  if (clip.label) j["label"] = *clip.label;
  Json frames = Json::array();
  for (const auto& f : clip.frames) {
    Json jf;
    jf["embedding"] = encode_embedding(f.embedding, enc);
    jf["quality"] = f.quality_score;
    jf["detection"] = f.detection_score;
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  Json embs = Json::object();
  for (const auto& [m, e] : clip.clip_embeddings) embs[std::string(to_string(m))] = encode_embedding(e, enc);
  j["embeddings"] = std::move(embs);
  return j;
}

ClipRecord clip_from_json(const Json& j, EmbeddingEncoding enc) {
  ClipRecord clip;
  clip.clip_id = j.at("clip_id").get<std::string>();
  if (auto it = j.find("label"); it != j.end()) clip.label = it->get<int>();
  for (const auto& jf : j.at("frames")) {
    FrameObservation f;
    f.embedding = decode_embedding(jf.at("embedding"), enc);
    f.quality_score = jf.at("quality").get<double>();
    f.detection_score = jf.at("detection").get<double>();
    clip.frames.push_back(std::move(f));
  }
  for (const auto& [name, e] : j.at("embeddings").items()) {
    clip.clip_embeddings[parse_modality(name)] = decode_embedding(e, enc);
  }
  return clip;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::kIoFailure, "failed writing " + path.string());
}

Error malformed(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  return Error(ErrorKind::kMalformedRecord, path.string() + " line " + std::to_string(line) + ": " + what);
}

void write_label_lines(const std::filesystem::path& path,
                       const std::map<int, std::vector<std::string>>& lines) {
  auto out = open_out(path);
  for (const auto& [label, ids] : lines) {
    out << label;
    for (const auto& id : ids) out << ' ' << id;
    out << '\n';
  }
  finish(out, path);
}

std::map<int, std::vector<std::string>> read_label_lines(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::map<int, std::vector<std::string>> lines;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int label = 0;
    if (!(ss >> label)) throw malformed(path, n, "expected a label");
    if (lines.contains(label)) throw malformed(path, n, "label " + std::to_string(label) + " repeated");
    auto& ids = lines[label];
    for (std::string id; ss >> id;) ids.push_back(id);
  }
  return lines;
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, path.string() + ": " + e.what());
  }
}

void check_header(const Json& j, std::string_view format, int version, const std::filesystem::path& path) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw Error(ErrorKind::kMalformedRecord, path.string() + " is not a " + std::string(format) + " file");
  }
  const int found = j.value("version", -1);
  if (found != version) {
    throw Error(ErrorKind::kVersionMismatch, path.string() + " has version " + std::to_string(found) +
                                                 ", expected " + std::to_string(version));
  }
}

Json list_to_json(std::string_view part, const std::string& model, const PredictionList& list) {
  Json j;
  j["part"] = part;
  j["model"] = model;
  j["label"] = list.label;
  Json entries = Json::array();
  for (const auto& e : list.entries) entries.push_back(Json::array({e.clip_id, e.result_score}));
  j["entries"] = std::move(entries);
  return j;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

std::filesystem::path manifest_path(const std::filesystem::path& corpus) {
  return std::filesystem::path(corpus.string() + ".manifest.json");
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  Json manifest;
  manifest["format"] = kCorpusFormat;
  manifest["version"] = corpus.manifest.version;
  manifest["dims"] = dims_to_json(corpus.manifest.dims);
  manifest["num_classes"] = corpus.manifest.num_classes;
  manifest["encoding"] = encoding_name(corpus.manifest.encoding);
  write_text_file(manifest_path(path), manifest.dump(2) + "\n");

  auto out = open_out(path);
  for (const auto& clip : corpus.clips) out << clip_to_json(clip, corpus.manifest.encoding).dump() << '\n';
  finish(out, path);
}

Corpus read_corpus(const std::filesystem::path& path) {
  const auto mpath = manifest_path(path);
  const Json m = read_json_file(mpath);
  check_header(m, kCorpusFormat, kCorpusFormatVersion, mpath);
  Corpus corpus;
  try {
    corpus.manifest.version = m.at("version").get<int>();
    corpus.manifest.dims = dims_from_json(m.at("dims"));
    corpus.manifest.num_classes = m.at("num_classes").get<std::size_t>();
    const auto enc = m.at("encoding").get<std::string>();
    if (enc == "text") {
      corpus.manifest.encoding = EmbeddingEncoding::kText;
    } else if (enc == "base64") {
      corpus.manifest.encoding = EmbeddingEncoding::kBase64;
    } else {
      throw std::invalid_argument("unknown encoding '" + enc + "'");
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, mpath.string() + ": " + e.what());
  }

  auto in = open_in(path);
  std::string line;
  std::size_t n = 0;
  const auto classes = static_cast<int>(corpus.manifest.num_classes);
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      ClipRecord clip = clip_from_json(Json::parse(line), corpus.manifest.encoding);
      validate_clip(clip, corpus.manifest.dims, classes > 0 ? std::optional(classes) : std::nullopt);
      corpus.clips.push_back(std::move(clip));
    } catch (const std::exception& e) {
      throw malformed(path, n, e.what());
    }
  }
  return corpus;
}

void write_retrieval(const std::filesystem::path& path, const RetrievalResult& result, std::size_t cut) {
  std::map<int, std::vector<std::string>> lines;
  for (const auto& [label, list] : result.lists) {
    auto& ids = lines[label];
    for (std::size_t i = 0; i < list.size() && i < cut; ++i) ids.push_back(list[i].clip_id);
  }
  write_label_lines(path, lines);
}

RetrievalResult read_retrieval(const std::filesystem::path& path) {
  RetrievalResult r;
  for (auto& [label, ids] : read_label_lines(path)) {
    auto& list = r.lists[label];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      list.push_back({std::move(ids[i]), 1.0 / static_cast<double>(i + 1)});
    }
  }
  return r;
}

void write_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::map<int, std::vector<std::string>> lines;
  for (const auto& [label, ids] : truth.positives) lines[label].assign(ids.begin(), ids.end());
  write_label_lines(path, lines);
}

GroundTruth read_truth(const std::filesystem::path& path) {
  GroundTruth t;
  for (auto& [label, ids] : read_label_lines(path)) {
    if (ids.empty()) throw Error(ErrorKind::kMalformedRecord, path.string() + ": label " +
                                                                  std::to_string(label) + " has no positives");
    t.positives[label].insert(ids.begin(), ids.end());
  }
  return t;
}

void write_predictions(const std::filesystem::path& path, const StagePredictions& predictions) {
  auto out = open_out(path);
  Json header;
  header["format"] = kPredictionFormat;
  header["version"] = kPredictionVersion;
  header["num_labels"] = predictions.num_labels;
  out << header.dump() << '\n';
  for (const auto& [label, list] : predictions.part_a) out << list_to_json("A", "A", list).dump() << '\n';
  for (const auto& [model, lists] : predictions.part_b) {
    for (const auto& [label, list] : lists) out << list_to_json("B", model, list).dump() << '\n';
  }
  finish(out, path);
}

StagePredictions read_predictions(const std::filesystem::path& path) {
  auto in = open_in(path);
  StagePredictions p;
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw malformed(path, n, e.what());
    }
    if (!have_header) {
      check_header(j, kPredictionFormat, kPredictionVersion, path);
      p.num_labels = j.at("num_labels").get<std::size_t>();
      have_header = true;
      continue;
    }
    try {
      PredictionList list;
      list.label = j.at("label").get<int>();
      int rank = 1;
      for (const auto& e : j.at("entries")) {
        list.entries.push_back({e.at(0).get<std::string>(), e.at(1).get<double>(), rank++});
      }
      const auto part = j.at("part").get<std::string>();
      if (part == "A") {
        p.part_a[list.label] = std::move(list);
      } else if (part == "B") {
        p.part_b[j.at("model").get<std::string>()][list.label] = std::move(list);
      } else {
        throw std::invalid_argument("unknown part '" + part + "'");
      }
    } catch (const std::exception& e) {
      throw malformed(path, n, e.what());
    }
  }
  if (!have_header) throw Error(ErrorKind::kMalformedRecord, path.string() + " has no header line");
  return p;
}

void save_grid(const std::filesystem::path& dir, const ModelGrid& grid) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  Json m;
  m["format"] = kGridFormat;
  m["version"] = kGridVersion;
  m["num_classes"] = grid.num_classes;
  Json routing;
  routing["quality_bands"] = grid.routing.quality_bands;
  routing["band_upper"] = grid.routing.band_upper;
  routing["part_a_quality_threshold"] = grid.routing.part_a_quality_threshold;
  routing["part_a_detection_threshold"] = grid.routing.part_a_detection_threshold;
  routing["folds"] = grid.routing.folds;
  m["routing"] = std::move(routing);
  m["part_a_models"] = grid.part_a.size();
  m["part_b_models"] = grid.part_b.size();
  Json models = Json::array();
  auto add = [&](const GridModel& g) {
    const std::string file = g.name() + ".ckpt";
    save_checkpoint(g.params, dir / file);
    Json jm;
    jm["name"] = g.name();
    jm["part"] = g.part == Part::kA ? "A" : "B";
    jm["modality"] = to_string(g.modality);
    if (g.part == Part::kA) jm["band"] = g.band;
    jm["fold"] = g.fold;
    const auto shape = g.params.shape();
    jm["input_dim"] = shape.input_dim;
    jm["hidden_dim"] = shape.hidden_dim;
    jm["file"] = file;
    jm["epoch_loss"] = g.epoch_loss;
    models.push_back(std::move(jm));
  };
  for (const auto& g : grid.part_a) add(g);
  for (const auto& g : grid.part_b) add(g);
  m["models"] = std::move(models);
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

ModelGrid load_grid(const std::filesystem::path& dir) {
  const auto mpath = dir / "manifest.json";
  const Json m = read_json_file(mpath);
  check_header(m, kGridFormat, kGridVersion, mpath);
  ModelGrid grid;
  try {
    grid.num_classes = m.at("num_classes").get<std::size_t>();
    const auto& r = m.at("routing");
    grid.routing.quality_bands = r.at("quality_bands").get<std::vector<double>>();
    grid.routing.band_upper = r.at("band_upper").get<double>();
    grid.routing.part_a_quality_threshold = r.at("part_a_quality_threshold").get<double>();
    grid.routing.part_a_detection_threshold = r.at("part_a_detection_threshold").get<double>();
    grid.routing.folds = r.at("folds").get<std::size_t>();
    for (const auto& jm : m.at("models")) {
      GridModel g;
      g.part = jm.at("part").get<std::string>() == "A" ? Part::kA : Part::kB;
      g.modality = parse_modality(jm.at("modality").get<std::string>());
      g.band = jm.value("band", 0.0);
      g.fold = jm.at("fold").get<std::size_t>();
      g.epoch_loss = jm.value("epoch_loss", std::vector<double>{});
      g.params = load_checkpoint(dir / jm.at("file").get<std::string>());
      if (g.params.shape().num_classes != grid.num_classes) {
        throw Error(ErrorKind::kDimensionMismatch, g.name() + " has " +
                                                       std::to_string(g.params.shape().num_classes) +
                                                       " classes, manifest says " +
                                                       std::to_string(grid.num_classes));
      }
      (g.part == Part::kA ? grid.part_a : grid.part_b).push_back(std::move(g));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, mpath.string() + ": " + e.what());
  }
  validate(grid.routing);
  return grid;
}

MetricsReport evaluate(const RetrievalResult& result, const GroundTruth& truth, std::size_t cut) {
  MetricsReport r;
  r.cut = cut;
  r.per_label = per_label_ap(result, truth, cut);
  r.map = mean_average_precision(result, truth, cut);
  return r;
}

std::string to_json(const MetricsReport& report) {
  Json j;
  j["map"] = report.map;
  j["cut"] = report.cut;
  j["num_ids"] = report.per_label.size();
  if (report.map_part_a) j["map_part_a"] = *report.map_part_a;
  if (report.map_part_b) j["map_part_b"] = *report.map_part_b;
  if (!report.map_modality.empty()) {
    Json mm = Json::object();
    for (const auto& [m, v] : report.map_modality) mm[std::string(to_string(m))] = v;
    j["map_modality"] = std::move(mm);
  }
  if (report.part_a_clips) j["part_a_clips"] = *report.part_a_clips;
  if (report.part_b_clips) j["part_b_clips"] = *report.part_b_clips;
  Json per = Json::array();
  for (const auto& ap : report.per_label) {
    Json e;
    e["label"] = ap.label;
    e["ap"] = ap.ap;
    e["positives"] = ap.positives;
    per.push_back(std::move(e));
  }
  j["per_label_ap"] = std::move(per);
  return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
  write_text_file(path, to_json(report));
}

}  // namespace pidfuse
