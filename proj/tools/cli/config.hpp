#pragma once

#include "atl/synthdata.hpp"
#include "atl/trainer.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace atl::cli {

/// Everything one run needs. Serialized as `key = value` lines; `#` starts
/// a comment.
struct ExperimentConfig {
    /// "synth" or the path of a manifest CSV.
    std::string data_source = "synth";
    SynthSpec synth;
    SplitPolicy split_policy = SplitPolicy::random;
    std::uint64_t split_seed = 1;
    LabelKey split_group = LabelKey::orth1;
    double audio_duration = 1.0;
    StftOptions stft;
    TrainConfig train;
    Selection selection = Selection::val_accuracy;
    std::vector<std::string> orth_checkpoints;
    std::string output_dir = "runs/default";
};

/// Throws ConfigError with a `origin:line:` prefix on any bad line.
ExperimentConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in a fixed order; parse_config of the
/// result reproduces the config exactly.
std::string format_config(const ExperimentConfig& config);

/// Assigns one key; throws ConfigError on unknown keys or bad values.
void set_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

std::vector<int> parse_int_list(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

}  // namespace atl::cli
