#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace atl {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Dense row-major tensor of doubles. Owns its buffer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::int64_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 4-D accessors (batch, channel, row, col); no bounds checks.
    double& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) noexcept {
        return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const noexcept {
        return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }

    /// Same values, new extents. Throws ShapeError when element counts differ.
    Tensor reshaped(Shape shape) const;

    /// Copy of sample `index` along axis 0, keeping a leading extent of 1.
    Tensor slice0(std::int64_t index) const;

    void fill(double value);
    bool all_finite() const noexcept;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator*=(double scale) noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_finite(const Tensor& t, const char* what);

/// Bitwise hash of values and extents (FNV-1a over the raw bytes).
std::uint64_t hash_bits(const Tensor& t, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace atl
