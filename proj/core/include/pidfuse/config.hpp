#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "pidfuse/mlp.hpp"
#include "pidfuse/router.hpp"
#include "pidfuse/synthdata.hpp"

namespace pidfuse {

struct PipelineConfig {
  TrainConfig train;
  RoutingConfig routing;
  SynthConfig synth;
  std::size_t cut = 100;
};

// Flat "key = value" document; '#' starts a comment. Keys mirror the
// TrainConfig, RoutingConfig and SynthConfig fields (see to_config_text).
// Unknown keys and unparsable values throw kInvalidConfig naming the line.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

// Every key with its current value; parse_config(to_config_text(c)) == c.
std::string to_config_text(const PipelineConfig& config);

// Threads one seed through every stage.
void apply_seed(PipelineConfig& config, std::uint64_t seed);

// Throws kInvalidConfig.
void validate(const PipelineConfig& config);

}  // namespace pidfuse
