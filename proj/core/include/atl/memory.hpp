#pragma once

#include "atl/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace atl {

struct LayerMemory {
    int layer = 0;
    std::uint64_t gram_elements = 0;     // batch * channels^2
    std::uint64_t feature_elements = 0;  // batch * channels * rows * cols
};

/// Extra memory needed to train with anti-transfer:
///   total = extractor + sum over AT layers of 2 * (gram + feature) * bytes
/// (the factor 2 covers the trained and the pre-trained network).
struct MemoryEstimate {
    std::uint64_t extractor_bytes = 0;
    std::vector<LayerMemory> layers;
    std::uint64_t bytes_per_number = 4;
    std::uint64_t total_bytes = 0;

    std::uint64_t layer_bytes(const LayerMemory& l) const {
        return 2 * (l.gram_elements + l.feature_elements) * bytes_per_number;
    }
};

/// Exact integer arithmetic. The extractor size is the parameter count of
/// the whole conv stack times `bytes_per_number`. `input_shape` ([C,H,W])
/// replaces the architecture's own input extents.
MemoryEstimate estimate_memory(const ArchConfig& arch, const Shape& input_shape, std::uint64_t batch,
                               const std::vector<int>& at_layers, std::uint64_t bytes_per_number = 4);

nlohmann::json to_json(const MemoryEstimate& m);

}  // namespace atl
