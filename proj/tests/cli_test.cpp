#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "pidfuse/eval.hpp"
#include "pidfuse/io.hpp"
#include "temp_dir.hpp"

namespace pidfuse {
namespace {

using testing_support::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// A desk corpus small enough that the whole grid trains in well under a second.
std::string write_small_config(const TempDir& dir) {
  const auto path = dir / "small.conf";
  write_text_file(path,
                  "n_identities = 6\n"
                  "n_clips_per_identity = 4\n"
                  "n_train_clips_per_identity = 6\n"
                  "n_distractor_clips = 5\n"
                  "dim = 8\n"
                  "hidden_dim = 16\n"
                  "batch_size = 16\n"
                  "epochs = 4\n");
  return path.string();
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"eval", "--truth", "x"}).code, 2);
  EXPECT_EQ(run({"gen"}).code, 2);
  TempDir dir("cli");
  EXPECT_EQ(run({"gen", "--out-dir", dir.path().string(), "--encoding", "xml"}).code, 2);
}

TEST(Cli, HelpExitsZero) {
  const auto o = run({"--help"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("pipeline"), std::string::npos);
}

TEST(Cli, DataErrorsExitOne) {
  TempDir dir("cli");
  write_text_file(dir / "retrieval.txt", "0 a a\n");
  write_text_file(dir / "truth.txt", "0 a\n");
  const auto o = run({"eval", "--retrieval", (dir / "retrieval.txt").string(), "--truth",
                      (dir / "truth.txt").string()});
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("pidfuse:"), std::string::npos);

  write_text_file(dir / "bad.conf", "no_such_key = 1\n");
  EXPECT_EQ(run({"gen", "--out-dir", (dir / "g").string(), "--config", (dir / "bad.conf").string()}).code, 1);
}

TEST(Cli, EvalMatchesLibrary) {
  TempDir dir("cli");
  write_text_file(dir / "retrieval.txt", "0 a x b\n1 y z\n2 c\n");
  write_text_file(dir / "truth.txt", "0 a b\n1 z w\n2 c\n");
  const auto o = run({"eval", "--retrieval", (dir / "retrieval.txt").string(), "--truth",
                      (dir / "truth.txt").string(), "--out", (dir / "report.json").string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto report = nlohmann::json::parse(read_text_file(dir / "report.json"));
  const auto result = read_retrieval(dir / "retrieval.txt");
  const auto truth = read_truth(dir / "truth.txt");
  const double lib = mean_average_precision(result, truth);
  EXPECT_EQ(report.at("map").get<double>(), lib);
  EXPECT_NEAR(lib, oracle_map(result, truth), 1e-12);
  EXPECT_NEAR(lib, ((1 + 2.0 / 3) / 2 + 0.25 + 1) / 3, 1e-12);
  EXPECT_NE(o.out.find("MAP"), std::string::npos);
}

TEST(Cli, PerfectRetrievalScoresOne) {
  TempDir dir("cli");
  write_text_file(dir / "retrieval.txt", "0 a b\n1 c\n");
  write_text_file(dir / "truth.txt", "0 a b\n1 c\n");
  const auto o = run({"eval", "--retrieval", (dir / "retrieval.txt").string(), "--truth",
                      (dir / "truth.txt").string(), "--out", (dir / "r.json").string()});
  ASSERT_EQ(o.code, 0);
  EXPECT_EQ(nlohmann::json::parse(read_text_file(dir / "r.json")).at("map").get<double>(), 1.0);
}

TEST(Cli, StagedRunReproducesPipeline) {
  TempDir dir("cli");
  const auto conf = write_small_config(dir);
  const auto p = (dir / "pipe").string();
  ASSERT_EQ(run({"pipeline", "--config", conf, "--seed", "5", "--out-dir", p}).code, 0);

  const auto s = dir / "staged";
  ASSERT_EQ(run({"gen", "--config", conf, "--seed", "5", "--out-dir", s.string()}).code, 0);
  EXPECT_EQ(read_text_file(s / "train.jsonl"), read_text_file(dir / "pipe" / "corpus" / "train.jsonl"));
  ASSERT_EQ(run({"train", "--config", conf, "--seed", "5", "--train", (s / "train.jsonl").string(),
                 "--out", (s / "models").string()}).code, 0);
  ASSERT_EQ(run({"predict", "--models", (s / "models").string(), "--corpus",
                 (s / "gallery.jsonl").string(), "--out", (s / "pred.jsonl").string()}).code, 0);
  ASSERT_EQ(run({"fuse", "--predictions", (s / "pred.jsonl").string(), "--out",
                 (s / "retrieval.txt").string()}).code, 0);
  EXPECT_EQ(read_text_file(s / "pred.jsonl"), read_text_file(dir / "pipe" / "predictions.jsonl"));
  EXPECT_EQ(read_text_file(s / "retrieval.txt"), read_text_file(dir / "pipe" / "retrieval.txt"));

  const auto e = run({"eval", "--retrieval", (s / "retrieval.txt").string(), "--truth",
                      (s / "truth.txt").string(), "--out", (s / "report.json").string()});
  ASSERT_EQ(e.code, 0);
  const auto staged = nlohmann::json::parse(read_text_file(s / "report.json"));
  const auto piped = nlohmann::json::parse(read_text_file(dir / "pipe" / "report.json"));
  EXPECT_EQ(staged.at("map"), piped.at("map"));
}

TEST(Cli, PipelineIsDeterministic) {
  TempDir dir("cli");
  const auto conf = write_small_config(dir);
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"pipeline", "--config", conf, "--seed", "3", "--threads", "2", "--out-dir",
                   (dir / name).string()}).code, 0);
  }
  for (const char* file : {"retrieval.txt", "report.json", "predictions.jsonl", "config.effective"}) {
    EXPECT_EQ(read_text_file(dir / "a" / file), read_text_file(dir / "b" / file)) << file;
  }
  ASSERT_EQ(run({"pipeline", "--config", conf, "--seed", "4", "--out-dir", (dir / "c").string()}).code, 0);
  EXPECT_NE(read_text_file(dir / "a" / "predictions.jsonl"), read_text_file(dir / "c" / "predictions.jsonl"));
}

TEST(Cli, PipelineReportFields) {
  TempDir dir("cli");
  const auto conf = write_small_config(dir);
  const auto o = run({"pipeline", "--config", conf, "--out-dir", dir.path().string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto report = nlohmann::json::parse(read_text_file(dir / "report.json"));
  for (const char* key : {"map", "per_label_ap", "map_modality", "part_a_clips", "part_b_clips"}) {
    EXPECT_TRUE(report.contains(key)) << key;
  }
  EXPECT_EQ(report.at("per_label_ap").size(), 6u);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "models" / "manifest.json"));
  EXPECT_EQ(manifest.at("part_a_models"), 20);
  EXPECT_EQ(manifest.at("part_b_models"), 15);
  // One retrieval line per identity.
  const auto retrieval = read_text_file(dir / "retrieval.txt");
  EXPECT_EQ(std::count(retrieval.begin(), retrieval.end(), '\n'), 6);
}

TEST(Cli, AudioEmbed) {
  TempDir dir("cli");
  std::string pcm(2 * 1600, '\0');
  for (std::size_t i = 0; i < 1600; ++i) pcm[2 * i] = static_cast<char>(i % 200);
  write_text_file(dir / "a.pcm", pcm);
  const auto o = run({"audio-embed", "--pcm", (dir / "a.pcm").string(), "--rate", "16000"});
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream values(o.out);
  std::size_t n = 0;
  for (double v; values >> v;) ++n;
  EXPECT_EQ(n, 512u);
  EXPECT_EQ(run({"audio-embed", "--pcm", (dir / "a.pcm").string(), "--rate", "8000"}).code, 1);
}

}  // namespace
}  // namespace pidfuse
