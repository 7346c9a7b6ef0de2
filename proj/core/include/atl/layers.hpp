#pragma once

#include "atl/tensor.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace atl {

enum class LayerKind { conv2d, maxpool2d, dense, relu, dropout, flatten, softmax };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

/// One entry of a sequential architecture. Fields that do not apply to
/// `kind` are ignored (and kept at their defaults by the factories).
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int channels = 0;  // conv2d output channels
    int kernel = 0;    // conv2d / maxpool2d square kernel
    int stride = 1;
    int padding = 0;
    bool ceil_mode = false;  // maxpool2d output rounding
    int units = 0;           // dense outputs
    double drop_probability = 0.0;

    static LayerSpec conv2d(int channels, int kernel = 3, int stride = 1, int padding = 1);
    static LayerSpec maxpool2d(int kernel, int stride, int padding = 0, bool ceil_mode = false);
    static LayerSpec dense(int units);
    static LayerSpec relu() { return {}; }
    static LayerSpec dropout(double p);
    static LayerSpec flatten();
    static LayerSpec softmax();

    void validate() const;
    bool has_parameters() const noexcept { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
    /// Output extents (without batch axis) for the given input extents.
    Shape output_shape(const Shape& input) const;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::int64_t pool_output_extent(std::int64_t in, const LayerSpec& pool);

// Layer kernels on batched tensors. Backward functions accumulate into
// parameter gradients (dw, db) and overwrite the input gradient (dx); any
// output pointer may be null when that gradient is not needed.

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding);
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, int stride, int padding, Tensor* dx,
                     Tensor* dw, Tensor* db);

Tensor maxpool2d_forward(const Tensor& x, const LayerSpec& pool, std::vector<std::int64_t>* argmax);
Tensor maxpool2d_backward(const Shape& x_shape, const Tensor& dy, const std::vector<std::int64_t>& argmax);

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// Row-wise softmax over the last axis of a [batch, n] tensor.
Tensor softmax_forward(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& dy);

}  // namespace atl
