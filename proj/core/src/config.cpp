#include "pidfuse/config.hpp"

#include <array>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "pidfuse/error.hpp"
#include "pidfuse/io.hpp"

namespace pidfuse {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("not a number");
  return out;
}

std::uint64_t to_uint(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("not a non-negative integer");
  return out;
}

std::vector<double> to_list(std::string_view v) {
  std::vector<double> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(to_double(trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  std::array<char, 64> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

using Setter = std::function<void(PipelineConfig&, std::string_view)>;
using Getter = std::function<std::string(const PipelineConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class T>
Field real_field(T PipelineConfig::*group, double T::*member) {
  return {[=](PipelineConfig& c, std::string_view v) { c.*group.*member = to_double(v); },
          [=](const PipelineConfig& c) { return fmt(c.*group.*member); }};
}

template <class T, class U>
Field uint_field(T PipelineConfig::*group, U T::*member) {
  return {[=](PipelineConfig& c, std::string_view v) { c.*group.*member = static_cast<U>(to_uint(v)); },
          [=](const PipelineConfig& c) { return std::to_string(c.*group.*member); }};
}

Field map_field(std::map<Modality, double> SynthConfig::*member, Modality m) {
  return {[=](PipelineConfig& c, std::string_view v) { (c.synth.*member)[m] = to_double(v); },
          [=](const PipelineConfig& c) { return fmt((c.synth.*member).at(m)); }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const auto table = [] {
    std::map<std::string, Field, std::less<>> t;
    using P = PipelineConfig;
    t["learning_rate"] = real_field(&P::train, &TrainConfig::learning_rate);
    t["batch_size"] = uint_field(&P::train, &TrainConfig::batch_size);
    t["dropout_keep_prob"] = real_field(&P::train, &TrainConfig::dropout_keep_prob);
    t["epochs"] = uint_field(&P::train, &TrainConfig::epochs);
    t["hidden_dim"] = uint_field(&P::train, &TrainConfig::hidden_dim);
    t["adam_beta1"] = real_field(&P::train, &TrainConfig::adam_beta1);
    t["adam_beta2"] = real_field(&P::train, &TrainConfig::adam_beta2);
    t["adam_epsilon"] = real_field(&P::train, &TrainConfig::adam_epsilon);
    t["train_seed"] = uint_field(&P::train, &TrainConfig::rng_seed);
    t["quality_bands"] = {[](P& c, std::string_view v) { c.routing.quality_bands = to_list(v); },
                          [](const P& c) {
                            std::string s;
                            for (double b : c.routing.quality_bands) s += (s.empty() ? "" : ",") + fmt(b);
                            return s;
                          }};
    t["band_upper"] = real_field(&P::routing, &RoutingConfig::band_upper);
    t["part_a_quality_threshold"] = real_field(&P::routing, &RoutingConfig::part_a_quality_threshold);
    t["part_a_detection_threshold"] = real_field(&P::routing, &RoutingConfig::part_a_detection_threshold);
    t["folds"] = uint_field(&P::routing, &RoutingConfig::folds);
    t["n_identities"] = uint_field(&P::synth, &SynthConfig::n_identities);
    t["n_clips_per_identity"] = uint_field(&P::synth, &SynthConfig::n_clips_per_identity);
    t["n_train_clips_per_identity"] = uint_field(&P::synth, &SynthConfig::n_train_clips_per_identity);
    t["n_distractor_clips"] = uint_field(&P::synth, &SynthConfig::n_distractor_clips);
    t["dim"] = uint_field(&P::synth, &SynthConfig::dim);
    t["noise_reference_dim"] = uint_field(&P::synth, &SynthConfig::noise_reference_dim);
    t["frames_min"] = uint_field(&P::synth, &SynthConfig::frames_min);
    t["frames_max"] = uint_field(&P::synth, &SynthConfig::frames_max);
    for (Modality m : kAllModalities) {
      const std::string name(to_string(m));
      t["noise_" + name] = map_field(&SynthConfig::modality_noise, m);
      t["dropout_" + name] = map_field(&SynthConfig::modality_dropout, m);
    }
    t["quality_noise_coupling"] = real_field(&P::synth, &SynthConfig::quality_noise_coupling);
    t["detection_noise"] = real_field(&P::synth, &SynthConfig::detection_noise);
    t["synth_seed"] = uint_field(&P::synth, &SynthConfig::seed);
    t["cut"] = {[](P& c, std::string_view v) { c.cut = static_cast<std::size_t>(to_uint(v)); },
                [](const P& c) { return std::to_string(c.cut); }};
    return t;
  }();
  return table;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw Error(ErrorKind::kInvalidConfig, where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) {
      throw Error(ErrorKind::kInvalidConfig, where + ": unknown key '" + std::string(key) + "'");
    }
    try {
      it->second.set(config, value);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorKind::kInvalidConfig,
                  where + ": bad value for '" + std::string(key) + "': " + e.what());
    }
  }
  validate(config);
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::string to_config_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

void apply_seed(PipelineConfig& config, std::uint64_t seed) {
  config.train.rng_seed = seed;
  config.synth.seed = seed;
}

void validate(const PipelineConfig& config) {
  validate(config.train);
  validate(config.routing);
  validate(config.synth);
  if (config.cut == 0) throw Error(ErrorKind::kInvalidConfig, "cut must be positive");
}

}  // namespace pidfuse
