#pragma once

#include "atl/adam.hpp"
#include "atl/at_loss.hpp"
#include "atl/audio.hpp"
#include "atl/dataset.hpp"
#include "atl/model_zoo.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace atl {

enum class Strategy { scratch, wi, wi_freeze, at, at_inverse, dual_at };
enum class SplitPolicy { random, class_wise };
/// How the best epoch / best sweep row is chosen.
enum class Selection { val_accuracy, val_loss };

std::string_view to_string(Strategy s);
std::string_view to_string(SplitPolicy p);
std::string_view to_string(Selection s);
Strategy strategy_from_string(std::string_view name);
SplitPolicy split_policy_from_string(std::string_view name);
Selection selection_from_string(std::string_view name);

/// Number of orthogonal checkpoints a strategy consumes.
int required_checkpoints(Strategy s);

struct TrainConfig {
    Strategy strategy = Strategy::scratch;
    ATConfig at;
    AdamOptions adam;
    int batch_size = 13;
    int max_epochs = 50;
    int patience = 5;
    LabelKey label = LabelKey::target;
    std::string arch_preset = "vgg-tiny";
    int hidden_units = 0;
    double dropout = 0.5;
    /// Weight init, shuffling and dropout masks all derive from this seed.
    std::uint64_t seed = 1;
    bool normalize = true;
    std::string task = "target";

    /// Throws ConfigError when the strategy, AT config and number of
    /// orthogonal checkpoints disagree.
    void validate(std::size_t orth_checkpoints) const;
    /// Anti-transfer configuration actually applied by the strategy
    /// (direction forced by at/at_inverse, empty layer set otherwise).
    ATConfig effective_at() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

struct SplitFractions {
    double train = 0.7;
    double val = 0.2;
    double test = 0.1;
};

/// random: shuffled 70/20/10 per target class (stratified).
/// class_wise: whole `group_key` classes go to one split each, assigned
/// greedily (largest class first) to the split furthest below its quota.
SplitIndices split(const Dataset& data, SplitPolicy policy, std::uint64_t seed, LabelKey group_key = LabelKey::orth1,
                   const SplitFractions& fractions = {});

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

Splits apply_split(const Dataset& data, const SplitIndices& indices);

struct EpochMetrics {
    int epoch = 0;
    double train_ce = 0.0;
    double val_ce = 0.0;
    double train_at = 0.0;
    double val_at = 0.0;
    std::vector<double> train_at_layers;
    std::vector<double> val_at_layers;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double seconds = 0.0;

    double val_loss() const { return val_ce + val_at; }
};

struct Evaluation {
    double accuracy = 0.0;
    double cross_entropy = 0.0;
    /// confusion[true][predicted]
    std::vector<std::vector<std::int64_t>> confusion;
};

/// Eval-mode accuracy and confusion matrix. `num_classes` defaults to the
/// network's output size.
Evaluation evaluate(const Network& network, const Dataset& data, LabelKey label, int batch_size = 64);

struct TrainResult {
    Network model;
    Provenance provenance;
    NormStats norm;
    std::vector<EpochMetrics> metrics;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    double best_val_accuracy = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    Evaluation test;
    /// Hash of the conv weights right before the first update of the final
    /// stage (see conv_weights_hash).
    std::uint64_t initial_conv_hash = 0;
    /// dual_at only: stage-2 model (AT against the first checkpoint).
    std::optional<Network> intermediate;
    std::vector<EpochMetrics> intermediate_metrics;
};

std::uint64_t conv_weights_hash(const Network& network);

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs one strategy on prepared splits. `orth` holds the orthogonal
/// networks (one for wi/wi_freeze/at/at_inverse, two ordered for dual_at);
/// they are only read.
TrainResult train(const TrainConfig& config, const Splits& data, const std::vector<const Network*>& orth = {},
                  const EpochCallback& on_epoch = {});

/// Trains an orthogonal-task model with the same protocol (scratch
/// strategy on `config.label`) and tags the provenance with the task name.
TrainResult pretrain(TrainConfig config, const Splits& data, const EpochCallback& on_epoch = {});

struct SweepRow {
    int layer = 0;
    double beta = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double best_val_loss = 0.0;
    /// Validation cross-entropy at the best epoch (AT term excluded).
    double val_cross_entropy = 0.0;
    int best_epoch = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::size_t best = 0;
    Selection selection = Selection::val_accuracy;
};

/// One training run per AT layer (single-layer AT each time).
SweepResult sweep_layers(const TrainConfig& base, const std::vector<int>& layers, const Splits& data,
                         const std::vector<const Network*>& orth, Selection selection = Selection::val_accuracy,
                         int jobs = 1);
/// One training run per beta with the base config's layer set.
SweepResult sweep_betas(const TrainConfig& base, const std::vector<double>& betas, const Splits& data,
                        const std::vector<const Network*>& orth, Selection selection = Selection::val_accuracy,
                        int jobs = 1);

/// val_accuracy: highest accuracy, ties broken by lower validation
/// cross-entropy. val_loss: lowest CE + AT.
std::size_t select_best(const std::vector<SweepRow>& rows, Selection selection);

/// `epoch,train_ce,val_ce,train_at,val_at,train_acc,val_acc,seconds`
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& metrics);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);
nlohmann::json summary_json(const TrainResult& result, const nlohmann::json& config_echo);

nlohmann::json to_json(const TrainConfig& config);

}  // namespace atl
