#pragma once

#include "atl/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace atl {

inline constexpr char kContainerMagic[4] = {'A', 'T', 'C', 'K'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Little-endian tensor container:
///   "ATCK" | u32 version | u64 header length | header JSON |
///   u32 tensor count | per tensor: u32 name length, name, u8 dtype,
///   u32 rank, u64 extents[rank], raw values.
struct Container {
    nlohmann::json header = nlohmann::json::object();
    std::vector<NamedTensor> tensors;

    const Tensor& tensor(const std::string& name) const;
};

std::string encode_container(const Container& c, DType dtype = DType::f64);
Container decode_container(const std::string& bytes);

void write_container(const std::filesystem::path& path, const Container& c, DType dtype = DType::f64);
Container read_container(const std::filesystem::path& path);

/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace atl
