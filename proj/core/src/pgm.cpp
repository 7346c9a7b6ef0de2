#include "atl/pgm.hpp"

#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace atl {

namespace {

void check_extent(std::size_t n, int rows, int cols) {
    if (rows <= 0 || cols <= 0 || n != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw ShapeError("image of " + std::to_string(rows) + "x" + std::to_string(cols) + " cannot hold " +
                         std::to_string(n) + " values");
    }
}

std::uint8_t to_byte(double unit) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(unit, 0.0, 1.0))); }

}  // namespace

GrayImage quantize(std::span<const double> values, int rows, int cols) {
    check_extent(values.size(), rows, cols);
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double range = *hi - *lo;
    GrayImage img{rows, cols, std::vector<std::uint8_t>(values.size(), 0)};
    if (range > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) img.pixels[i] = to_byte((values[i] - *lo) / range);
    }
    return img;
}

GrayImage quantize_unit(std::span<const double> values, int rows, int cols) {
    check_extent(values.size(), rows, cols);
    GrayImage img{rows, cols, std::vector<std::uint8_t>(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) img.pixels[i] = to_byte(values[i]);
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    check_extent(image.pixels.size(), image.rows, image.cols);
    std::string bytes = "P5\n" + std::to_string(image.cols) + " " + std::to_string(image.rows) + "\n255\n";
    bytes.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    write_file_atomic(path, bytes);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::size_t pos = 0;
    const auto fail = [&](const std::string& what) -> FormatError {
        return FormatError(path.string() + ": " + what);
    };
    const auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const auto start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (start == pos) throw fail("truncated PGM header");
        return bytes.substr(start, pos - start);
    };
    if (next_token() != "P5") throw fail("not a binary PGM (P5)");
    int cols = 0, rows = 0, maxval = 0;
    try {
        cols = std::stoi(next_token());
        rows = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::logic_error&) {
        throw fail("malformed PGM header");
    }
    if (maxval != 255) throw fail("only 8-bit PGM is supported");
    if (rows <= 0 || cols <= 0) throw fail("bad PGM extents");
    ++pos;  // single whitespace after maxval
    const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    if (bytes.size() < pos + n) throw fail("truncated PGM pixel data");
    GrayImage img{rows, cols, std::vector<std::uint8_t>(n)};
    std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), n, img.pixels.begin());
    return img;
}

}  // namespace atl
