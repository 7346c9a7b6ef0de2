#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace atl {

/// 8-bit grayscale image.
struct GrayImage {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> pixels;
};

/// Min-max scales to 0..255 (constant input maps to 0).
GrayImage quantize(std::span<const double> values, int rows, int cols);

/// Scales [0,1] values to 0..255 without re-normalizing.
GrayImage quantize_unit(std::span<const double> values, int rows, int cols);

/// Binary P5, maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace atl
