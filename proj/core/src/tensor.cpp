#include "atl/tensor.hpp"

#include "atl/errors.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace atl {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto extent : shape) {
        if (extent < 0) {
            throw ShapeError("negative extent in shape " + to_string(shape));
        }
        n *= extent;
    }
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != numel(shape_)) {
        throw ShapeError("tensor of shape " + to_string(shape_) + " given " + std::to_string(data_.size()) +
                         " values");
    }
}

std::int64_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
    }
    return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (numel(shape) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice0(std::int64_t index) const {
    if (shape_.empty() || index < 0 || index >= shape_[0]) {
        throw ShapeError("slice index out of range for shape " + to_string(shape_));
    }
    Shape s = shape_;
    s[0] = 1;
    const auto stride = static_cast<std::size_t>(numel(s));
    std::vector<double> v(data_.begin() + static_cast<std::ptrdiff_t>(stride * index),
                          data_.begin() + static_cast<std::ptrdiff_t>(stride * (index + 1)));
    return Tensor(std::move(s), std::move(v));
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "tensor +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double scale) noexcept {
    for (double& v : data_) v *= scale;
    return *this;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) {
        throw NumericError(std::string("non-finite value in ") + what);
    }
}

std::uint64_t hash_bits(const Tensor& t, std::uint64_t seed) {
    std::uint64_t h = seed;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (auto e : t.shape()) mix(&e, sizeof e);
    mix(t.data(), t.size() * sizeof(double));
    return h;
}

}  // namespace atl
