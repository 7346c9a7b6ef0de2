#include "atl/model_zoo.hpp"

#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace atl {

namespace {

// Pool geometry used by every preset: 3x3 window, stride 2, ceil rounding.
// Keeps VGG16 at 224 -> 112 -> 56 -> 28 -> 14 -> 7 and maps a 126x129
// spectrogram to 7x8 at the last conv block.
LayerSpec vgg_pool() {
    return LayerSpec::maxpool2d(3, 2, 0, true);
}

void append_head(ArchConfig& arch, int hidden_layers, int hidden_units, double dropout) {
    arch.layers.push_back(LayerSpec::flatten());
    for (int i = 0; i < hidden_layers; ++i) {
        arch.layers.push_back(LayerSpec::dense(hidden_units));
        arch.layers.push_back(LayerSpec::relu());
        arch.layers.push_back(LayerSpec::dropout(dropout));
    }
    arch.layers.push_back(LayerSpec::dense(arch.num_classes));
}

ArchConfig from_blocks(const std::string& name, const std::vector<std::vector<int>>& blocks,
                       const PresetOptions& o, int default_hidden, int hidden_layers) {
    ArchConfig arch;
    arch.name = name;
    arch.input_shape = o.input_shape;
    arch.num_classes = o.num_classes;
    int remaining = o.conv_layers > 0 ? o.conv_layers : 1 << 30;
    for (const auto& block : blocks) {
        if (remaining <= 0) break;
        for (int channels : block) {
            if (remaining-- <= 0) break;
            arch.layers.push_back(LayerSpec::conv2d(channels, 3, 1, 1));
            arch.layers.push_back(LayerSpec::relu());
        }
        arch.layers.push_back(vgg_pool());
    }
    append_head(arch, hidden_layers, o.hidden_units > 0 ? o.hidden_units : default_hidden, o.dropout);
    arch.validate();
    return arch;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

ArchConfig vgg16(const PresetOptions& o) {
    return from_blocks("vgg16", {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}}, o, 4096,
                       2);
}

ArchConfig vgg_tiny(const PresetOptions& o) {
    return from_blocks("vgg-tiny", {{16}, {32}, {64}, {64}}, o, 64, 1);
}

ArchConfig vgg_small(const PresetOptions& o) {
    return from_blocks("vgg-small", {{16, 16}, {32, 32}, {64, 64}, {128, 128}}, o, 128, 1);
}

ArchConfig make_preset(const std::string& name, const PresetOptions& options) {
    if (name == "vgg16") return vgg16(options);
    if (name == "vgg-tiny") return vgg_tiny(options);
    if (name == "vgg-small") return vgg_small(options);
    throw ConfigError("unknown architecture preset '" + name + "' (vgg16, vgg-tiny, vgg-small)");
}

std::vector<std::string> preset_names() {
    return {"vgg16", "vgg-tiny", "vgg-small"};
}

Network build(const ArchConfig& config, std::uint64_t seed) {
    Network net(config);
    Rng rng(seed);
    for (auto& p : net.parameters()) {
        if (p.value.rank() == 1) continue;  // biases start at zero
        std::int64_t fan_in = 1;
        for (std::size_t d = 1; d < p.value.rank(); ++d) fan_in *= p.value.dim(d);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : p.value.storage()) v = rng.uniform(-bound, bound);
    }
    return net;
}

nlohmann::json arch_to_json(const ArchConfig& arch) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : arch.layers) {
        nlohmann::json j{{"kind", std::string(to_string(l.kind))}};
        switch (l.kind) {
            case LayerKind::conv2d:
                j["channels"] = l.channels;
                j["kernel"] = l.kernel;
                j["stride"] = l.stride;
                j["padding"] = l.padding;
                break;
            case LayerKind::maxpool2d:
                j["kernel"] = l.kernel;
                j["stride"] = l.stride;
                j["padding"] = l.padding;
                j["ceil_mode"] = l.ceil_mode;
                break;
            case LayerKind::dense: j["units"] = l.units; break;
            case LayerKind::dropout: j["p"] = l.drop_probability; break;
            default: break;
        }
        layers.push_back(std::move(j));
    }
    return {{"name", arch.name},
            {"input_shape", arch.input_shape},
            {"num_classes", arch.num_classes},
            {"layers", std::move(layers)},
            {"fingerprint", hex64(arch.fingerprint())}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    try {
        ArchConfig arch;
        arch.name = j.at("name").get<std::string>();
        arch.input_shape = j.at("input_shape").get<Shape>();
        arch.num_classes = j.at("num_classes").get<int>();
        for (const auto& lj : j.at("layers")) {
            LayerSpec l;
            l.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
            l.channels = lj.value("channels", 0);
            l.kernel = lj.value("kernel", 0);
            l.stride = lj.value("stride", 1);
            l.padding = lj.value("padding", 0);
            l.ceil_mode = lj.value("ceil_mode", false);
            l.units = lj.value("units", 0);
            l.drop_probability = lj.value("p", 0.0);
            arch.layers.push_back(l);
        }
        arch.validate();
        if (j.contains("fingerprint") && j.at("fingerprint").get<std::string>() != hex64(arch.fingerprint())) {
            throw FormatError("stored conv fingerprint does not match the stored architecture");
        }
        return arch;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed architecture: ") + e.what());
    }
}

std::string encode_checkpoint(const Network& network, const Provenance& provenance) {
    Container c;
    nlohmann::json frozen = nlohmann::json::array();
    for (const auto& p : network.parameters()) {
        if (!p.trainable) frozen.push_back(p.name);
    }
    c.header = {{"kind", "checkpoint"},
                {"arch", arch_to_json(network.arch())},
                {"provenance",
                 {{"task", provenance.task},
                  {"seed", provenance.seed},
                  {"epoch", provenance.epoch},
                  {"strategy", provenance.strategy},
                  {"norm_mean", provenance.norm_mean},
                  {"norm_std", provenance.norm_std}}},
                {"frozen", frozen}};
    for (const auto& p : network.parameters()) c.tensors.push_back({p.name, p.value});
    return encode_container(c);
}

ModelCheckpoint decode_checkpoint(const std::string& bytes) {
    const Container c = decode_container(bytes);
    if (c.header.value("kind", "") != "checkpoint") throw FormatError("container is not a model checkpoint");
    ModelCheckpoint ck;
    ck.network = Network(arch_from_json(c.header.at("arch")));
    try {
        const auto& pj = c.header.at("provenance");
        ck.provenance.task = pj.at("task").get<std::string>();
        ck.provenance.seed = pj.at("seed").get<std::uint64_t>();
        ck.provenance.epoch = pj.at("epoch").get<int>();
        ck.provenance.strategy = pj.value("strategy", "");
        ck.provenance.norm_mean = pj.value("norm_mean", 0.0);
        ck.provenance.norm_std = pj.value("norm_std", 1.0);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed provenance: ") + e.what());
    }
    auto& params = ck.network.parameters();
    if (c.tensors.size() != params.size()) {
        throw FormatError("checkpoint holds " + std::to_string(c.tensors.size()) + " tensors, architecture needs " +
                          std::to_string(params.size()));
    }
    for (auto& p : params) {
        const Tensor& t = c.tensor(p.name);
        if (t.shape() != p.value.shape()) {
            throw FormatError("tensor " + p.name + " has shape " + to_string(t.shape()) + ", expected " +
                              to_string(p.value.shape()));
        }
        p.value = t;
    }
    for (const auto& name : c.header.value("frozen", nlohmann::json::array())) {
        ck.network.parameter(name.get<std::string>()).trainable = false;
    }
    return ck;
}

void save_checkpoint(const Network& network, const Provenance& provenance, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(network, provenance));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_file(path));
}

void require_compatible(const ArchConfig& a, const ArchConfig& b, int up_to_conv, const std::string& role) {
    if (up_to_conv > a.conv_count() || up_to_conv > b.conv_count()) {
        throw CompatibilityError(role + ": conv layer " + std::to_string(up_to_conv) + " missing (" +
                                 std::to_string(a.conv_count()) + " vs " + std::to_string(b.conv_count()) +
                                 " conv layers)");
    }
    if (a.fingerprint(up_to_conv) != b.fingerprint(up_to_conv)) {
        throw CompatibilityError(role + ": conv stacks differ up to conv " + std::to_string(up_to_conv) +
                                 " (fingerprint " + hex64(a.fingerprint(up_to_conv)) + " vs " +
                                 hex64(b.fingerprint(up_to_conv)) + ")");
    }
}

ModelCheckpoint load_extractor(const std::filesystem::path& path, const ArchConfig& trained,
                               const std::vector<int>& at_layers) {
    auto ck = load_checkpoint(path);
    const int depth = at_layers.empty() ? 0 : *std::max_element(at_layers.begin(), at_layers.end());
    require_compatible(trained, ck.network.arch(), depth, "AT extractor " + path.string());
    return ck;
}

void init_from(Network& target, const Network& source, std::optional<int> freeze_up_to) {
    const int depth = target.arch().conv_count();
    require_compatible(target.arch(), source.arch(), depth, "weight initialization");
    for (int k = 1; k <= depth; ++k) {
        for (const char* suffix : {".weight", ".bias"}) {
            const std::string name = "conv" + std::to_string(k) + suffix;
            target.parameter(name).value = source.parameter(name).value;
        }
    }
    for (auto& p : target.parameters()) p.trainable = true;
    if (freeze_up_to) target.freeze_conv_up_to(*freeze_up_to);
}

std::map<int, Tensor> extract_features(const Network& network, const Tensor& batch, const std::vector<int>& layers) {
    ForwardOptions opts;
    opts.mode = Mode::eval;
    opts.taps = layers;
    opts.stop_after_taps = true;
    return network.forward(batch, opts).taps;
}

}  // namespace atl
