#pragma once

#include "atl/layers.hpp"
#include "atl/rng.hpp"
#include "atl/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace atl {

/// Sequential architecture: ordered layers plus the input extents
/// ([channels, rows, cols]) and the number of output classes.
struct ArchConfig {
    std::string name = "custom";
    Shape input_shape;
    int num_classes = 0;
    std::vector<LayerSpec> layers;

    void validate() const;
    /// Output extents of every layer, without the batch axis.
    std::vector<Shape> layer_output_shapes() const;
    int conv_count() const;
    /// Position in `layers` of the 1-based conv layer `conv_index`.
    std::size_t conv_position(int conv_index) const;
    /// Position whose output is the tap for `conv_index`: the ReLU directly
    /// after the conv when there is one, the conv itself otherwise.
    std::size_t tap_position(int conv_index) const;
    Shape tap_shape(int conv_index) const;
    /// Stable hash of the input channel count and every layer up to and
    /// including conv `up_to_conv` (spatial input size is not part of it).
    std::uint64_t fingerprint(int up_to_conv) const;
    std::uint64_t fingerprint() const { return fingerprint(conv_count()); }

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;
};

enum class Mode { train, eval };

class Network;

/// Everything a forward pass records for the matching backward pass.
class Tape {
public:
    bool recorded() const noexcept { return owner_ != nullptr; }
    Mode mode() const noexcept { return mode_; }
    /// Hash of every ReLU sign pattern and pooling argmax. Two evaluations
    /// with equal signatures lie on the same piecewise-smooth branch.
    std::uint64_t signature() const;

private:
    friend class Network;
    const Network* owner_ = nullptr;
    Mode mode_ = Mode::eval;
    bool truncated_ = false;
    std::vector<int> taps_;
    std::vector<Tensor> inputs_;
    std::vector<std::vector<std::int64_t>> argmax_;
    std::vector<Tensor> dropout_scale_;
};

struct ForwardOptions {
    Mode mode = Mode::eval;
    /// 1-based conv indices whose post-activation maps are returned.
    std::vector<int> taps;
    /// Dropout mask source; required in train mode when any dropout p > 0.
    Rng* rng = nullptr;
    Tape* tape = nullptr;
    /// Skip every layer after the deepest tap (feature extraction only);
    /// `output` is then that tap's map.
    bool stop_after_taps = false;
};

struct ForwardResult {
    Tensor output;
    std::map<int, Tensor> taps;
};

struct BackwardResult {
    /// Total gradient at each tap recorded by the forward pass.
    std::map<int, Tensor> tap_grads;
    /// Only filled when requested.
    Tensor input_grad;
};

/// Sequential network: architecture plus named parameters and gradients.
class Network {
public:
    Network() = default;
    explicit Network(ArchConfig arch);

    const ArchConfig& arch() const noexcept { return arch_; }
    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }
    Parameter& parameter(std::string_view name);
    const Parameter& parameter(std::string_view name) const;

    /// Parameter indices (weight, bias) of layer `position`, or -1.
    int weight_index(std::size_t position) const { return layer_param_[position]; }

    void zero_grad();
    void set_conv_trainable(int conv_index, bool trainable);
    bool conv_trainable(int conv_index) const;
    /// Marks conv layers 1..conv_index as non-trainable.
    void freeze_conv_up_to(int conv_index);
    std::size_t parameter_count() const;
    std::uint64_t weights_hash() const;

    ForwardResult forward(const Tensor& input, const ForwardOptions& options = {}) const;

    /// Reverse pass over a recorded tape. `output_grad` is dLoss/dOutput;
    /// `tap_injections` adds extra gradient at tapped feature maps (the AT
    /// term enters here). Parameter gradients accumulate unless frozen.
    BackwardResult backward(const Tape& tape, const Tensor& output_grad,
                            const std::map<int, Tensor>& tap_injections = {}, bool need_input_grad = false);

private:
    ArchConfig arch_;
    std::vector<Parameter> params_;
    std::vector<int> layer_param_;
    std::vector<Shape> output_shapes_;
};

}  // namespace atl
