#include "atl/network.hpp"

#include "atl/errors.hpp"

#include <algorithm>
#include <sstream>

namespace atl {

void ArchConfig::validate() const {
    if (input_shape.size() != 3 || numel(input_shape) <= 0) {
        throw ConfigError("architecture input shape must be [C,H,W], got " + to_string(input_shape));
    }
    if (num_classes < 1) throw ConfigError("architecture needs at least one class");
    if (layers.empty()) throw ConfigError("architecture has no layers");
    for (const auto& layer : layers) layer.validate();
    const auto shapes = layer_output_shapes();
    if (shapes.back().size() != 1 || shapes.back()[0] != num_classes) {
        throw ConfigError("network output " + to_string(shapes.back()) + " does not match class count " +
                          std::to_string(num_classes));
    }
}

std::vector<Shape> ArchConfig::layer_output_shapes() const {
    std::vector<Shape> shapes;
    shapes.reserve(layers.size());
    Shape current = input_shape;
    for (const auto& layer : layers) {
        current = layer.output_shape(current);
        shapes.push_back(current);
    }
    return shapes;
}

int ArchConfig::conv_count() const {
    return static_cast<int>(std::count_if(layers.begin(), layers.end(),
                                          [](const LayerSpec& l) { return l.kind == LayerKind::conv2d; }));
}

std::size_t ArchConfig::conv_position(int conv_index) const {
    int seen = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind == LayerKind::conv2d && ++seen == conv_index) return i;
    }
    throw ConfigError("conv layer " + std::to_string(conv_index) + " does not exist (network has " +
                      std::to_string(conv_count()) + " conv layers)");
}

std::size_t ArchConfig::tap_position(int conv_index) const {
    const auto pos = conv_position(conv_index);
    if (pos + 1 < layers.size() && layers[pos + 1].kind == LayerKind::relu) return pos + 1;
    return pos;
}

Shape ArchConfig::tap_shape(int conv_index) const {
    return layer_output_shapes()[tap_position(conv_index)];
}

std::uint64_t ArchConfig::fingerprint(int up_to_conv) const {
    std::ostringstream os;
    os << "in:" << (input_shape.empty() ? 0 : input_shape[0]) << ';';
    const std::size_t end = up_to_conv <= 0 ? 0 : conv_position(up_to_conv) + 1;
    for (std::size_t i = 0; i < end; ++i) {
        const auto& l = layers[i];
        os << to_string(l.kind);
        switch (l.kind) {
            case LayerKind::conv2d:
                os << '(' << l.channels << ',' << l.kernel << ',' << l.stride << ',' << l.padding << ')';
                break;
            case LayerKind::maxpool2d:
                os << '(' << l.kernel << ',' << l.stride << ',' << l.padding << ',' << l.ceil_mode << ')';
                break;
            default: break;
        }
        os << ';';
    }
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : os.str()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t Tape::signature() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    if (!owner_) return h;
    const auto& layers = owner_->arch().layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind == LayerKind::relu) {
            for (double v : inputs_[i].storage()) mix(v > 0.0);
        } else if (layers[i].kind == LayerKind::maxpool2d) {
            for (auto idx : argmax_[i]) mix(static_cast<std::uint64_t>(idx));
        }
    }
    return h;
}

Network::Network(ArchConfig arch) : arch_(std::move(arch)) {
    arch_.validate();
    output_shapes_ = arch_.layer_output_shapes();
    layer_param_.assign(arch_.layers.size(), -1);
    Shape in = arch_.input_shape;
    int conv = 0, dense = 0;
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
        const auto& l = arch_.layers[i];
        if (l.kind == LayerKind::conv2d) {
            const std::string prefix = "conv" + std::to_string(++conv);
            layer_param_[i] = static_cast<int>(params_.size());
            Shape ws{l.channels, in[0], l.kernel, l.kernel};
            params_.push_back({prefix + ".weight", Tensor(ws), Tensor(ws), true});
            params_.push_back({prefix + ".bias", Tensor({l.channels}), Tensor({l.channels}), true});
        } else if (l.kind == LayerKind::dense) {
            const std::string prefix = "dense" + std::to_string(++dense);
            layer_param_[i] = static_cast<int>(params_.size());
            Shape ws{l.units, in[0]};
            params_.push_back({prefix + ".weight", Tensor(ws), Tensor(ws), true});
            params_.push_back({prefix + ".bias", Tensor({l.units}), Tensor({l.units}), true});
        }
        in = output_shapes_[i];
    }
}

Parameter& Network::parameter(std::string_view name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw ConfigError("no parameter named '" + std::string(name) + "'");
}

const Parameter& Network::parameter(std::string_view name) const {
    return const_cast<Network*>(this)->parameter(name);
}

void Network::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

void Network::set_conv_trainable(int conv_index, bool trainable) {
    const auto idx = static_cast<std::size_t>(layer_param_[arch_.conv_position(conv_index)]);
    params_[idx].trainable = trainable;
    params_[idx + 1].trainable = trainable;
}

bool Network::conv_trainable(int conv_index) const {
    return params_[static_cast<std::size_t>(layer_param_[arch_.conv_position(conv_index)])].trainable;
}

void Network::freeze_conv_up_to(int conv_index) {
    if (conv_index > arch_.conv_count()) {
        throw ConfigError("cannot freeze up to conv " + std::to_string(conv_index) + ": network has " +
                          std::to_string(arch_.conv_count()));
    }
    for (int k = 1; k <= conv_index; ++k) set_conv_trainable(k, false);
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::uint64_t Network::weights_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : params_) h = hash_bits(p.value, h);
    return h;
}

ForwardResult Network::forward(const Tensor& input, const ForwardOptions& options) const {
    if (input.rank() != 4 || Shape(input.shape().begin() + 1, input.shape().end()) != arch_.input_shape) {
        throw ShapeError("network expects input [B]" + to_string(arch_.input_shape) + ", got " +
                         to_string(input.shape()));
    }
    std::vector<std::size_t> tap_pos;
    for (int k : options.taps) tap_pos.push_back(arch_.tap_position(k));
    std::size_t end = arch_.layers.size();
    if (options.stop_after_taps && !tap_pos.empty()) end = *std::max_element(tap_pos.begin(), tap_pos.end()) + 1;

    Tape* tape = options.tape;
    if (tape) {
        *tape = Tape{};
        tape->owner_ = this;
        tape->mode_ = options.mode;
        tape->taps_ = options.taps;
        tape->inputs_.resize(arch_.layers.size());
        tape->argmax_.resize(arch_.layers.size());
        tape->dropout_scale_.resize(arch_.layers.size());
        tape->truncated_ = end != arch_.layers.size();
    }

    ForwardResult result;
    Tensor x = input;
    const auto batch = input.dim(0);
    for (std::size_t i = 0; i < end; ++i) {
        const auto& l = arch_.layers[i];
        if (tape) tape->inputs_[i] = x;
        Tensor y;
        switch (l.kind) {
            case LayerKind::conv2d: {
                const auto& w = params_[static_cast<std::size_t>(layer_param_[i])];
                const auto& b = params_[static_cast<std::size_t>(layer_param_[i]) + 1];
                y = conv2d_forward(x, w.value, b.value, l.stride, l.padding);
                break;
            }
            case LayerKind::maxpool2d:
                y = maxpool2d_forward(x, l, tape ? &tape->argmax_[i] : nullptr);
                break;
            case LayerKind::dense: {
                const auto& w = params_[static_cast<std::size_t>(layer_param_[i])];
                const auto& b = params_[static_cast<std::size_t>(layer_param_[i]) + 1];
                y = dense_forward(x, w.value, b.value);
                break;
            }
            case LayerKind::relu: y = relu_forward(x); break;
            case LayerKind::dropout:
                y = x;
                if (options.mode == Mode::train && l.drop_probability > 0.0) {
                    if (!options.rng) throw ConfigError("train-mode dropout needs a random generator");
                    const double keep = 1.0 - l.drop_probability;
                    Tensor scale(x.shape());
                    for (std::size_t j = 0; j < scale.size(); ++j) {
                        scale[j] = options.rng->uniform() < keep ? 1.0 / keep : 0.0;
                        y[j] *= scale[j];
                    }
                    if (tape) tape->dropout_scale_[i] = std::move(scale);
                }
                break;
            case LayerKind::flatten: {
                Shape s{batch};
                s.insert(s.end(), output_shapes_[i].begin(), output_shapes_[i].end());
                y = x.reshaped(std::move(s));
                break;
            }
            case LayerKind::softmax: y = softmax_forward(x); break;
        }
        if (!y.all_finite()) {
            throw NumericError("non-finite activation at layer " + std::to_string(i) + " (" +
                               std::string(to_string(l.kind)) + ")");
        }
        for (std::size_t t = 0; t < tap_pos.size(); ++t) {
            if (tap_pos[t] == i) result.taps[options.taps[t]] = y;
        }
        x = std::move(y);
    }
    result.output = std::move(x);
    return result;
}

BackwardResult Network::backward(const Tape& tape, const Tensor& output_grad,
                                 const std::map<int, Tensor>& tap_injections, bool need_input_grad) {
    if (tape.owner_ != this) throw Error("backward called without a matching forward pass");
    if (tape.truncated_) throw Error("backward over a truncated forward pass");
    std::map<std::size_t, int> tap_at;
    for (int k : tape.taps_) tap_at[arch_.tap_position(k)] = k;
    for (const auto& [k, g] : tap_injections) {
        if (std::find(tape.taps_.begin(), tape.taps_.end(), k) == tape.taps_.end()) {
            throw ConfigError("gradient injected at conv " + std::to_string(k) + " which was not tapped");
        }
    }

    BackwardResult result;
    Tensor g = output_grad;
    for (std::size_t step = arch_.layers.size(); step-- > 0;) {
        const auto& l = arch_.layers[step];
        const Tensor& x = tape.inputs_[step];
        if (auto it = tap_at.find(step); it != tap_at.end()) {
            if (auto inj = tap_injections.find(it->second); inj != tap_injections.end()) g += inj->second;
            result.tap_grads[it->second] = g;
        }
        const bool need_dx = step > 0 || need_input_grad;
        Tensor dx;
        switch (l.kind) {
            case LayerKind::conv2d:
            case LayerKind::dense: {
                auto& w = params_[static_cast<std::size_t>(layer_param_[step])];
                auto& b = params_[static_cast<std::size_t>(layer_param_[step]) + 1];
                Tensor* dw = w.trainable ? &w.grad : nullptr;
                Tensor* db = b.trainable ? &b.grad : nullptr;
                if (l.kind == LayerKind::conv2d) {
                    conv2d_backward(x, w.value, g, l.stride, l.padding, need_dx ? &dx : nullptr, dw, db);
                } else {
                    dense_backward(x, w.value, g, need_dx ? &dx : nullptr, dw, db);
                }
                break;
            }
            case LayerKind::maxpool2d: dx = maxpool2d_backward(x.shape(), g, tape.argmax_[step]); break;
            case LayerKind::relu: dx = relu_backward(x, g); break;
            case LayerKind::dropout:
                dx = g;
                if (!tape.dropout_scale_[step].empty()) {
                    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] *= tape.dropout_scale_[step][j];
                }
                break;
            case LayerKind::flatten: dx = g.reshaped(x.shape()); break;
            case LayerKind::softmax: dx = softmax_backward(softmax_forward(x), g); break;
        }
        g = std::move(dx);
    }
    for (const auto& p : params_) {
        if (p.trainable && !p.grad.all_finite()) throw NumericError("non-finite gradient for " + p.name);
    }
    if (need_input_grad) result.input_grad = std::move(g);
    return result;
}

}  // namespace atl
