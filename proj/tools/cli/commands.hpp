#pragma once

#include "cli/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace atl::cli {

/// Stable process exit codes.
enum Exit : int { ok = 0, check_failed = 1, config_error = 2, runtime_failure = 3 };

/// Command-line values that override the config file.
struct TrainOverrides {
    std::optional<Strategy> strategy;
    std::vector<int> at_layers;
    std::optional<double> beta;
    std::optional<Similarity> similarity;
    std::optional<Aggregation> aggregation;
    std::vector<std::string> checkpoints;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
};

void apply(ExperimentConfig& config, const TrainOverrides& overrides);

/// Train/val/test splits for the configured data source.
Splits load_splits(const ExperimentConfig& config);

/// Orthogonal-task checkpoint at `path`.
Network load_orth(const std::filesystem::path& path);

/// Pre-trains an orthogonal model; writes config.txt, metrics.csv,
/// summary.json and model.atck into the output directory.
void run_pretrain(const ExperimentConfig& config, std::ostream& log);

/// Same outputs as run_pretrain, plus intermediate.atck and
/// intermediate_metrics.csv for dual-at.
void run_train(const ExperimentConfig& config, std::ostream& log);

/// One row per layer (when `layers` is non-empty) or per beta.
void run_sweep(const ExperimentConfig& config, const std::vector<int>& layers, const std::vector<double>& betas,
               int jobs, std::ostream& log);

/// Default beta grid of the sweep command.
std::vector<double> default_beta_grid();

struct GradcamRequest {
    std::filesystem::path checkpoint;
    /// WAV file or `<container>.atck#<tensor>`.
    std::string input;
    int layer = 1;
    int class_index = 0;
    std::filesystem::path out_stem = "gradcam";
    bool nearest = false;
    bool csv = false;
};

void run_gradcam(const GradcamRequest& request, std::ostream& log);

struct MemoryRequest {
    std::string arch = "vgg16";
    std::uint64_t batch = 1;
    std::vector<int> at_layers;
    Shape input_shape{1, 126, 129};
    std::uint64_t bytes_per_number = 4;
    std::optional<std::filesystem::path> json_path;
};

void run_estimate_memory(const MemoryRequest& request, std::ostream& out);

/// Writes the synthetic dataset of `config` as containers plus manifests.
void run_synth(const ExperimentConfig& config, std::ostream& log);

}  // namespace atl::cli
