#include "atl/memory.hpp"

#include "atl/errors.hpp"

namespace atl {

MemoryEstimate estimate_memory(const ArchConfig& arch, const Shape& input_shape, std::uint64_t batch,
                               const std::vector<int>& at_layers, std::uint64_t bytes_per_number) {
    if (batch == 0) throw ConfigError("batch size must be >= 1");
    ArchConfig a = arch;
    a.input_shape = input_shape;
    const auto shapes = a.layer_output_shapes();

    MemoryEstimate m;
    m.bytes_per_number = bytes_per_number;
    std::uint64_t conv_params = 0;
    std::int64_t in_channels = input_shape.at(0);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const auto& l = a.layers[i];
        if (l.kind == LayerKind::conv2d) {
            conv_params += static_cast<std::uint64_t>(l.channels) * static_cast<std::uint64_t>(in_channels) *
                               static_cast<std::uint64_t>(l.kernel) * static_cast<std::uint64_t>(l.kernel) +
                           static_cast<std::uint64_t>(l.channels);
            in_channels = l.channels;
        }
    }
    m.extractor_bytes = conv_params * bytes_per_number;
    m.total_bytes = m.extractor_bytes;
    for (int layer : at_layers) {
        if (layer < 1 || layer > a.conv_count()) {
            throw ConfigError("AT layer " + std::to_string(layer) + " is not a conv layer of " + a.name);
        }
        const Shape& s = shapes[a.tap_position(layer)];
        LayerMemory lm;
        lm.layer = layer;
        const auto c = static_cast<std::uint64_t>(s[0]);
        lm.gram_elements = batch * c * c;
        lm.feature_elements = batch * static_cast<std::uint64_t>(numel(s));
        m.total_bytes += m.layer_bytes(lm);
        m.layers.push_back(lm);
    }
    return m;
}

nlohmann::json to_json(const MemoryEstimate& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers) {
        layers.push_back({{"layer", l.layer},
                          {"gram_elements", l.gram_elements},
                          {"feature_elements", l.feature_elements},
                          {"bytes", m.layer_bytes(l)}});
    }
    return {{"extractor_bytes", m.extractor_bytes},
            {"bytes_per_number", m.bytes_per_number},
            {"layers", layers},
            {"total_bytes", m.total_bytes}};
}

}  // namespace atl
