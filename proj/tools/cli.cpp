#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "pidfuse/audio.hpp"
#include "pidfuse/config.hpp"
#include "pidfuse/error.hpp"
#include "pidfuse/eval.hpp"
#include "pidfuse/io.hpp"
#include "pidfuse/pipeline.hpp"
#include "pidfuse/synthdata.hpp"

namespace pidfuse::cli {
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::optional<std::size_t> cut;
};

PipelineConfig resolve_config(const CommonFlags& flags) {
  PipelineConfig config = flags.config_path.empty() ? PipelineConfig{} : load_config(flags.config_path);
  if (flags.seed) apply_seed(config, *flags.seed);
  if (flags.cut) config.cut = *flags.cut;
  validate(config);
  return config;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_cut) {
  cmd->add_option("--config", flags.config_path, "Flat key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Seed for every random stream");
  cmd->add_option("--threads", flags.threads, "Worker threads for training")->check(CLI::PositiveNumber);
  if (with_cut) cmd->add_option("--cut", flags.cut, "Retrieval cut (default 100)")->check(CLI::PositiveNumber);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

struct CorpusPaths {
  fs::path train, gallery, truth;
};

CorpusPaths write_synthetic(const SynthCorpus& corpus, const fs::path& dir, EmbeddingEncoding enc) {
  ensure_dir(dir);
  CorpusPaths p{dir / "train.jsonl", dir / "gallery.jsonl", dir / "truth.txt"};
  CorpusManifest manifest{kCorpusFormatVersion, corpus.dims, corpus.num_classes, enc};
  write_corpus(p.train, {manifest, corpus.train});
  write_corpus(p.gallery, {manifest, corpus.gallery});
  write_truth(p.truth, corpus.truth);
  return p;
}

GroundTruth restrict_truth(const GroundTruth& truth, const std::vector<ClipRecord>& clips) {
  std::set<std::string> ids;
  for (const auto& c : clips) ids.insert(c.clip_id);
  GroundTruth out;
  for (const auto& [label, positives] : truth.positives) {
    for (const auto& p : positives) {
      if (ids.contains(p)) out.positives[label].insert(p);
    }
  }
  return out;
}

std::size_t num_classes_of(const Corpus& corpus) {
  if (corpus.manifest.num_classes > 0) return corpus.manifest.num_classes;
  int top = -1;
  for (const auto& c : corpus.clips) {
    if (c.label) top = std::max(top, *c.label);
  }
  return static_cast<std::size_t>(top + 1);
}

void print_map(std::ostream& out, const std::string& name, double value) {
  out << std::left << std::setw(14) << name << std::fixed << std::setprecision(4) << value << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-modal person identification: routing, MLP ensembles, rank fusion and MAP"};
  app.require_subcommand(1);

  // gen
  CommonFlags gen_flags;
  std::string gen_out;
  std::string gen_encoding = "text";
  auto* gen = app.add_subcommand("gen", "Generate a synthetic train/gallery corpus with ground truth");
  add_common(gen, gen_flags, false);
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  gen->add_option("--encoding", gen_encoding, "Embedding encoding")->check(CLI::IsMember({"text", "base64"}));

  // train
  CommonFlags train_flags;
  std::string train_corpus, train_out;
  auto* train_cmd = app.add_subcommand("train", "Train the Part A and Part B model grids");
  add_common(train_cmd, train_flags, false);
  train_cmd->add_option("--train", train_corpus, "Training corpus (.jsonl)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Model grid directory")->required();

  // predict
  std::string predict_models, predict_corpus, predict_out;
  auto* predict_cmd = app.add_subcommand("predict", "Score a gallery corpus into per-model prediction lists");
  predict_cmd->add_option("--models", predict_models, "Model grid directory")->required()->check(CLI::ExistingDirectory);
  predict_cmd->add_option("--corpus", predict_corpus, "Gallery corpus (.jsonl)")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", predict_out, "Predictions file")->required();

  // fuse
  CommonFlags fuse_flags;
  std::string fuse_in, fuse_out;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse prediction lists into the final retrieval file");
  add_common(fuse_cmd, fuse_flags, true);
  fuse_cmd->add_option("--predictions", fuse_in, "Predictions file")->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("--out", fuse_out, "Retrieval file")->required();

  // eval
  std::string eval_retrieval, eval_truth, eval_out;
  std::size_t eval_cut = kDefaultRetrievalCut;
  auto* eval_cmd = app.add_subcommand("eval", "Compute MAP and per-label AP");
  eval_cmd->add_option("--retrieval", eval_retrieval, "Retrieval file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--truth", eval_truth, "Ground-truth file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "Metrics report (JSON)");
  eval_cmd->add_option("--cut", eval_cut, "Retrieval cut")->check(CLI::PositiveNumber);

  // pipeline
  CommonFlags pipe_flags;
  std::string pipe_out, pipe_train, pipe_gallery, pipe_truth;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run gen (optional), train, predict, fuse and eval");
  add_common(pipe_cmd, pipe_flags, true);
  pipe_cmd->add_option("--out-dir", pipe_out, "Output directory")->required();
  auto* opt_train = pipe_cmd->add_option("--train", pipe_train, "Training corpus; synthetic if omitted")->check(CLI::ExistingFile);
  auto* opt_gallery = pipe_cmd->add_option("--gallery", pipe_gallery, "Gallery corpus")->check(CLI::ExistingFile);
  auto* opt_truth = pipe_cmd->add_option("--truth", pipe_truth, "Ground-truth file")->check(CLI::ExistingFile);
  opt_train->needs(opt_gallery, opt_truth);
  opt_gallery->needs(opt_train, opt_truth);
  opt_truth->needs(opt_train, opt_gallery);

  // audio-embed
  std::string audio_pcm, audio_out;
  int audio_rate = kAudioSampleRate;
  auto* audio_cmd = app.add_subcommand("audio-embed", "Spectrogram statistics embedding of raw 16-bit PCM");
  audio_cmd->add_option("--pcm", audio_pcm, "Mono 16-bit little-endian PCM file")->required()->check(CLI::ExistingFile);
  audio_cmd->add_option("--rate", audio_rate, "Sample rate in Hz")->required();
  audio_cmd->add_option("--out", audio_out, "Write the embedding here instead of stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "pidfuse: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) {
      const auto config = resolve_config(gen_flags);
      const auto corpus = generate(config.synth);
      const auto paths = write_synthetic(
          corpus, gen_out, gen_encoding == "base64" ? EmbeddingEncoding::kBase64 : EmbeddingEncoding::kText);
      out << "wrote " << corpus.train.size() << " training clips, " << corpus.gallery.size()
          << " gallery clips to " << fs::path(gen_out).string() << "\n";
      (void)paths;
    } else if (*train_cmd) {
      const auto config = resolve_config(train_flags);
      const auto corpus = read_corpus(train_corpus);
      const auto grid = train_grid(corpus.clips, num_classes_of(corpus), config.routing, config.train,
                                   train_flags.threads);
      save_grid(train_out, grid);
      out << "trained " << grid.part_a.size() << " Part A and " << grid.part_b.size()
          << " Part B models into " << train_out << "\n";
    } else if (*predict_cmd) {
      const auto grid = load_grid(predict_models);
      const auto corpus = read_corpus(predict_corpus);
      write_predictions(predict_out, predict(corpus.clips, grid));
      out << "scored " << corpus.clips.size() << " clips into " << predict_out << "\n";
    } else if (*fuse_cmd) {
      const auto config = resolve_config(fuse_flags);
      write_retrieval(fuse_out, fuse_predictions(read_predictions(fuse_in), config.cut), config.cut);
      out << "wrote " << fuse_out << "\n";
    } else if (*eval_cmd) {
      const auto report = evaluate(read_retrieval(eval_retrieval), read_truth(eval_truth), eval_cut);
      if (!eval_out.empty()) write_report(eval_out, report);
      print_map(out, "MAP", report.map);
    } else if (*pipe_cmd) {
      const auto started = std::chrono::steady_clock::now();
      const auto config = resolve_config(pipe_flags);
      const fs::path dir = pipe_out;
      ensure_dir(dir);
      CorpusPaths paths{pipe_train, pipe_gallery, pipe_truth};
      if (pipe_train.empty()) paths = write_synthetic(generate(config.synth), dir / "corpus", EmbeddingEncoding::kText);
      write_text_file(dir / "config.effective", to_config_text(config));

      // Every stage goes through its files so staged runs reproduce this one.
      const auto train_corpus_data = read_corpus(paths.train);
      save_grid(dir / "models", train_grid(train_corpus_data.clips, num_classes_of(train_corpus_data),
                                           config.routing, config.train, pipe_flags.threads));
      const auto grid = load_grid(dir / "models");
      const auto gallery = read_corpus(paths.gallery).clips;
      write_predictions(dir / "predictions.jsonl", predict(gallery, grid));
      const auto predictions = read_predictions(dir / "predictions.jsonl");
      const auto fused = fuse_predictions(predictions, config.cut);
      write_retrieval(dir / "retrieval.txt", fused, config.cut);

      const auto truth = read_truth(paths.truth);
      auto report = evaluate(read_retrieval(dir / "retrieval.txt"), truth, config.cut);
      const auto routed = route(gallery, grid.routing);
      report.part_a_clips = routed.part_a.size();
      report.part_b_clips = routed.part_b.size();
      const auto truth_a = restrict_truth(truth, routed.part_a);
      const auto truth_b = restrict_truth(truth, routed.part_b);
      if (truth_a.num_ids() > 0) {
        report.map_part_a = mean_average_precision(part_a_retrieval(predictions, config.cut), truth_a, config.cut);
      }
      if (truth_b.num_ids() > 0) {
        report.map_part_b = mean_average_precision(part_b_retrieval(predictions, config.cut), truth_b, config.cut);
      }
      for (Modality m : kAllModalities) {
        report.map_modality[m] =
            mean_average_precision(single_modality_retrieval(gallery, grid, m, config.cut), truth, config.cut);
      }
      write_report(dir / "report.json", report);

      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      print_map(out, "MAP fused", report.map);
      if (report.map_part_a) print_map(out, "MAP part A", *report.map_part_a);
      if (report.map_part_b) print_map(out, "MAP part B", *report.map_part_b);
      for (const auto& [m, v] : report.map_modality) print_map(out, "MAP " + std::string(to_string(m)), v);
      out << "routed " << *report.part_a_clips << " clips to Part A, " << *report.part_b_clips
          << " to Part B; " << std::setprecision(1) << secs << " s\n";
    } else if (*audio_cmd) {
      std::ifstream in(audio_pcm, std::ios::binary);
      if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + audio_pcm);
      const auto embedding = embed_audio(spectrogram(read_pcm16(in, audio_rate)));
      std::ostringstream line;
      line << std::setprecision(17);
      for (std::size_t i = 0; i < embedding.size(); ++i) line << (i ? " " : "") << embedding[i];
      line << "\n";
      if (audio_out.empty()) {
        out << line.str();
      } else {
        write_text_file(audio_out, line.str());
      }
    }
  } catch (const std::exception& e) {
    err << "pidfuse: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace pidfuse::cli
