#pragma once

#include "atl/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace atl {

/// Knobs shared by the VGG-style presets. Zero means "preset default".
struct PresetOptions {
    Shape input_shape{1, 126, 129};
    int num_classes = 4;
    int hidden_units = 0;
    double dropout = 0.5;
    /// Truncates the conv stack (vgg-tiny with 2 convs, for example).
    int conv_layers = 0;
};

/// Full 13-conv VGG16 with a single input channel and a 3-layer dense head.
ArchConfig vgg16(const PresetOptions& options = {});
/// 4 convs (16/32/64/64), one pool after each, two dense layers.
ArchConfig vgg_tiny(const PresetOptions& options = {});
/// 8 convs in four pairs (16/32/64/128), one pool per pair, two dense layers.
ArchConfig vgg_small(const PresetOptions& options = {});
/// "vgg16", "vgg-tiny" or "vgg-small".
ArchConfig make_preset(const std::string& name, const PresetOptions& options = {});
std::vector<std::string> preset_names();

/// Allocates parameters and fills them with Kaiming-uniform (fan-in) weights
/// and zero biases. Deterministic in `seed`.
Network build(const ArchConfig& config, std::uint64_t seed);

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

struct Provenance {
    std::string task;
    std::uint64_t seed = 0;
    int epoch = 0;
    std::string strategy;
    /// Input normalization the model was trained under.
    double norm_mean = 0.0;
    double norm_std = 1.0;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ModelCheckpoint {
    Network network;
    Provenance provenance;
};

std::string encode_checkpoint(const Network& network, const Provenance& provenance);
ModelCheckpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Network& network, const Provenance& provenance, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CompatibilityError unless both conv stacks agree up to `up_to_conv`.
void require_compatible(const ArchConfig& a, const ArchConfig& b, int up_to_conv, const std::string& role);

/// Loads a checkpoint for use as a frozen AT feature extractor; it must match
/// `trained` up to the deepest AT layer.
ModelCheckpoint load_extractor(const std::filesystem::path& path, const ArchConfig& trained,
                               const std::vector<int>& at_layers);

/// Copies every conv weight and bias of `source` into `target` (classifier
/// head untouched) and freezes conv 1..freeze_up_to when given.
void init_from(Network& target, const Network& source, std::optional<int> freeze_up_to = std::nullopt);

/// Eval-mode post-activation maps at the given conv layers.
std::map<int, Tensor> extract_features(const Network& network, const Tensor& batch, const std::vector<int>& layers);

}  // namespace atl
