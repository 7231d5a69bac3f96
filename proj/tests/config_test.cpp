#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "pidfuse/config.hpp"

namespace pidfuse {
namespace {

TEST(Config, DefaultsFromEmptyText) {
  const auto c = parse_config("");
  EXPECT_EQ(c.train.learning_rate, 0.0008);
  EXPECT_EQ(c.train.batch_size, 512u);
  EXPECT_EQ(c.train.hidden_dim, 1024u);
  EXPECT_EQ(c.routing.folds, 5u);
  EXPECT_EQ(c.routing.quality_bands, (std::vector<double>{40, 60, 80, 100}));
  EXPECT_EQ(c.synth.dim, 64u);
  EXPECT_EQ(c.cut, 100u);
}

TEST(Config, ParsesValuesAndComments) {
  const auto c = parse_config(
      "# desk settings\n"
      "hidden_dim = 128\n"
      "  batch_size=32   # trailing comment\n"
      "\n"
      "quality_bands = 50, 70\n"
      "noise_head = 0.75\n"
      "dropout_audio = 0\n"
      "cut = 20\n");
  EXPECT_EQ(c.train.hidden_dim, 128u);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.routing.quality_bands, (std::vector<double>{50, 70}));
  EXPECT_EQ(c.synth.modality_noise.at(Modality::kHead), 0.75);
  EXPECT_EQ(c.synth.modality_dropout.at(Modality::kAudio), 0.0);
  EXPECT_EQ(c.cut, 20u);
}

TEST(Config, TextRoundTrip) {
  auto c = parse_config("hidden_dim = 77\nlearning_rate = 0.00123\nquality_bands = 41.5, 90\n");
  apply_seed(c, 99);
  const std::string text = to_config_text(c);
  EXPECT_EQ(to_config_text(parse_config(text)), text);
  EXPECT_EQ(parse_config(text).train.learning_rate, 0.00123);
}

TEST(Config, SeedReachesEveryStage) {
  PipelineConfig c;
  apply_seed(c, 1234);
  EXPECT_EQ(c.train.rng_seed, 1234u);
  EXPECT_EQ(c.synth.seed, 1234u);
}

TEST(Config, UnknownKeyNamesTheLine) {
  try {
    parse_config("epochs = 3\nlearning_rat = 0.1\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidConfig);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Config, RejectsBadValues) {
  EXPECT_ERROR_KIND(parse_config("epochs = many\n"), ErrorKind::kInvalidConfig);
  EXPECT_ERROR_KIND(parse_config("epochs\n"), ErrorKind::kInvalidConfig);
  EXPECT_ERROR_KIND(parse_config("folds = 0\n"), ErrorKind::kInvalidConfig);
  EXPECT_ERROR_KIND(parse_config("quality_bands = 80, 40\n"), ErrorKind::kInvalidConfig);
  EXPECT_ERROR_KIND(parse_config("dropout_keep_prob = 0\n"), ErrorKind::kInvalidConfig);
}

}  // namespace
}  // namespace pidfuse
