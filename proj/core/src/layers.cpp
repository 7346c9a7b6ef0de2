#include "atl/layers.hpp"

#include "atl/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>

namespace atl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::int64_t conv_extent(std::int64_t in, int kernel, int stride, int padding) {
    const std::int64_t span = in + 2 * padding - kernel;
    if (span < 0) return 0;
    return span / stride + 1;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         to_string(t.shape()));
    }
}

// Unfolds sample n of x into a (C*k*k) x (Ho*Wo) matrix.
void im2col(const Tensor& x, std::int64_t n, int k, int stride, int pad, std::int64_t ho, std::int64_t wo,
            std::vector<double>& col) {
    const auto c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    const auto p = ho * wo;
    col.assign(static_cast<std::size_t>(c_in * k * k * p), 0.0);
    const double* src = x.data() + n * c_in * h * w;
    for (std::int64_t c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col.data() + ((c * k + ky) * k + kx) * p;
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    const double* src_row = src + (c * h + iy) * w;
                    double* dst = row + oy * wo;
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[ox] = src_row[ix];
                    }
                }
            }
        }
    }
}

void col2im(const std::vector<double>& col, std::int64_t n, int k, int stride, int pad, std::int64_t ho,
            std::int64_t wo, Tensor& dx) {
    const auto c_in = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    const auto p = ho * wo;
    double* dst = dx.data() + n * c_in * h * w;
    for (std::int64_t c = 0; c < c_in; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = col.data() + ((c * k + ky) * k + kx) * p;
                for (std::int64_t oy = 0; oy < ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    double* dst_row = dst + (c * h + iy) * w;
                    const double* src = row + oy * wo;
                    for (std::int64_t ox = 0; ox < wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst_row[ix] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::dropout: return "dropout";
        case LayerKind::flatten: return "flatten";
        case LayerKind::softmax: return "softmax";
    }
    return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
    for (auto kind : {LayerKind::conv2d, LayerKind::maxpool2d, LayerKind::dense, LayerKind::relu, LayerKind::dropout,
                      LayerKind::flatten, LayerKind::softmax}) {
        if (to_string(kind) == name) return kind;
    }
    throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(int channels, int kernel, int stride, int padding) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.channels = channels;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::maxpool2d(int kernel, int stride, int padding, bool ceil_mode) {
    LayerSpec s;
    s.kind = LayerKind::maxpool2d;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    s.ceil_mode = ceil_mode;
    return s;
}

LayerSpec LayerSpec::dense(int units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
}

LayerSpec LayerSpec::dropout(double p) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.drop_probability = p;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}

LayerSpec LayerSpec::softmax() {
    LayerSpec s;
    s.kind = LayerKind::softmax;
    return s;
}

void LayerSpec::validate() const {
    switch (kind) {
        case LayerKind::conv2d:
            if (channels < 1) throw ConfigError("conv2d: channels must be >= 1");
            if (kernel < 1) throw ConfigError("conv2d: kernel must be >= 1");
            if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
            if (padding < 0) throw ConfigError("conv2d: padding must be >= 0");
            break;
        case LayerKind::maxpool2d:
            if (kernel < 1) throw ConfigError("maxpool2d: kernel must be >= 1");
            if (stride < 1) throw ConfigError("maxpool2d: stride must be >= 1");
            if (padding < 0 || 2 * padding > kernel) throw ConfigError("maxpool2d: padding must be in [0, kernel/2]");
            break;
        case LayerKind::dense:
            if (units < 1) throw ConfigError("dense: units must be >= 1");
            break;
        case LayerKind::dropout:
            if (!(drop_probability >= 0.0 && drop_probability < 1.0)) {
                throw ConfigError("dropout: probability must be in [0,1)");
            }
            break;
        default: break;
    }
}

std::int64_t pool_output_extent(std::int64_t in, const LayerSpec& pool) {
    const std::int64_t span = in + 2 * pool.padding - pool.kernel;
    if (span < 0) return 0;
    std::int64_t out = pool.ceil_mode ? (span + pool.stride - 1) / pool.stride + 1 : span / pool.stride + 1;
    // The last window has to start inside the input or its left padding.
    if (pool.ceil_mode && (out - 1) * pool.stride >= in + pool.padding) --out;
    return out;
}

Shape LayerSpec::output_shape(const Shape& in) const {
    switch (kind) {
        case LayerKind::conv2d:
        case LayerKind::maxpool2d: {
            if (in.size() != 3) throw ShapeError(std::string(to_string(kind)) + " expects [C,H,W] input, got " + atl::to_string(in));
            const auto h = kind == LayerKind::conv2d ? conv_extent(in[1], kernel, stride, padding)
                                                     : pool_output_extent(in[1], *this);
            const auto w = kind == LayerKind::conv2d ? conv_extent(in[2], kernel, stride, padding)
                                                     : pool_output_extent(in[2], *this);
            if (h < 1 || w < 1) {
                throw ShapeError(std::string(to_string(kind)) + " produces empty output from " + atl::to_string(in));
            }
            return {kind == LayerKind::conv2d ? channels : in[0], h, w};
        }
        case LayerKind::dense:
            if (in.size() != 1) throw ShapeError("dense expects flat input, got " + atl::to_string(in));
            return {units};
        case LayerKind::flatten: return {numel(in)};
        case LayerKind::softmax:
            if (in.size() != 1) throw ShapeError("softmax expects flat input, got " + atl::to_string(in));
            return in;
        case LayerKind::relu:
        case LayerKind::dropout: return in;
    }
    return in;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
    require_rank(x, 4, "conv2d input");
    require_rank(w, 4, "conv2d weight");
    if (w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3) || b.size() != static_cast<std::size_t>(w.dim(0))) {
        throw ShapeError("conv2d: weight " + to_string(w.shape()) + " incompatible with input " + to_string(x.shape()));
    }
    const int k = static_cast<int>(w.dim(2));
    const auto batch = x.dim(0), c_out = w.dim(0);
    const auto ho = conv_extent(x.dim(2), k, stride, padding);
    const auto wo = conv_extent(x.dim(3), k, stride, padding);
    if (ho < 1 || wo < 1) throw ShapeError("conv2d: empty output for input " + to_string(x.shape()));
    const auto kk = x.dim(1) * k * k, p = ho * wo;

    Tensor y({batch, c_out, ho, wo});
    ConstMap wm(w.data(), c_out, kk);
    std::vector<double> col;
    for (std::int64_t n = 0; n < batch; ++n) {
        im2col(x, n, k, stride, padding, ho, wo, col);
        Map out(y.data() + n * c_out * p, c_out, p);
        out.noalias() = wm * ConstMap(col.data(), kk, p);
        for (std::int64_t c = 0; c < c_out; ++c) out.row(c).array() += b[static_cast<std::size_t>(c)];
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dy, int stride, int padding, Tensor* dx,
                     Tensor* dw, Tensor* db) {
    const int k = static_cast<int>(w.dim(2));
    const auto batch = x.dim(0), c_out = w.dim(0);
    const auto ho = dy.dim(2), wo = dy.dim(3);
    const auto kk = x.dim(1) * k * k, p = ho * wo;
    if (dy.dim(0) != batch || dy.dim(1) != c_out) throw ShapeError("conv2d backward: upstream gradient shape mismatch");

    ConstMap wm(w.data(), c_out, kk);
    if (dx) *dx = Tensor(x.shape());
    std::vector<double> col;
    std::vector<double> dcol;
    for (std::int64_t n = 0; n < batch; ++n) {
        ConstMap g(dy.data() + n * c_out * p, c_out, p);
        if (dw) {
            im2col(x, n, k, stride, padding, ho, wo, col);
            Map dwm(dw->data(), c_out, kk);
            dwm.noalias() += g * ConstMap(col.data(), kk, p).transpose();
        }
        if (db) {
            for (std::int64_t c = 0; c < c_out; ++c) (*db)[static_cast<std::size_t>(c)] += g.row(c).sum();
        }
        if (dx) {
            dcol.assign(static_cast<std::size_t>(kk * p), 0.0);
            Map dcm(dcol.data(), kk, p);
            dcm.noalias() = wm.transpose() * g;
            col2im(dcol, n, k, stride, padding, ho, wo, *dx);
        }
    }
}

Tensor maxpool2d_forward(const Tensor& x, const LayerSpec& pool, std::vector<std::int64_t>* argmax) {
    require_rank(x, 4, "maxpool2d input");
    const auto batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const auto ho = pool_output_extent(h, pool), wo = pool_output_extent(w, pool);
    if (ho < 1 || wo < 1) throw ShapeError("maxpool2d: empty output for input " + to_string(x.shape()));
    Tensor y({batch, c, ho, wo});
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t out = 0;
    for (std::int64_t plane = 0; plane < batch * c; ++plane) {
        const std::int64_t base = plane * h * w;
        for (std::int64_t oy = 0; oy < ho; ++oy) {
            const std::int64_t y0 = std::max<std::int64_t>(oy * pool.stride - pool.padding, 0);
            const std::int64_t y1 = std::min<std::int64_t>(oy * pool.stride - pool.padding + pool.kernel, h);
            for (std::int64_t ox = 0; ox < wo; ++ox, ++out) {
                const std::int64_t x0 = std::max<std::int64_t>(ox * pool.stride - pool.padding, 0);
                const std::int64_t x1 = std::min<std::int64_t>(ox * pool.stride - pool.padding + pool.kernel, w);
                double best = -std::numeric_limits<double>::infinity();
                std::int64_t best_index = base + y0 * w + x0;
                for (std::int64_t iy = y0; iy < y1; ++iy) {
                    for (std::int64_t ix = x0; ix < x1; ++ix) {
                        const std::int64_t idx = base + iy * w + ix;
                        if (x[static_cast<std::size_t>(idx)] > best) {
                            best = x[static_cast<std::size_t>(idx)];
                            best_index = idx;
                        }
                    }
                }
                y[out] = best;
                if (argmax) (*argmax)[out] = best_index;
            }
        }
    }
    return y;
}

Tensor maxpool2d_backward(const Shape& x_shape, const Tensor& dy, const std::vector<std::int64_t>& argmax) {
    if (argmax.size() != dy.size()) throw ShapeError("maxpool2d backward: argmax does not match upstream gradient");
    Tensor dx(x_shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[static_cast<std::size_t>(argmax[i])] += dy[i];
    return dx;
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "dense input");
    const auto batch = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (w.rank() != 2 || w.dim(1) != in || b.size() != static_cast<std::size_t>(out)) {
        throw ShapeError("dense: weight " + to_string(w.shape()) + " incompatible with input " + to_string(x.shape()));
    }
    Tensor y({batch, out});
    Map ym(y.data(), batch, out);
    ym.noalias() = ConstMap(x.data(), batch, in) * ConstMap(w.data(), out, in).transpose();
    for (std::int64_t n = 0; n < batch; ++n) {
        ym.row(n) += Eigen::Map<const Eigen::RowVectorXd>(b.data(), out);
    }
    return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor* dw, Tensor* db) {
    const auto batch = x.dim(0), in = x.dim(1), out = w.dim(0);
    if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != out) {
        throw ShapeError("dense backward: upstream gradient shape mismatch");
    }
    ConstMap g(dy.data(), batch, out);
    if (dw) Map(dw->data(), out, in).noalias() += g.transpose() * ConstMap(x.data(), batch, in);
    if (db) Eigen::Map<Eigen::RowVectorXd>(db->data(), out) += g.colwise().sum();
    if (dx) {
        *dx = Tensor(x.shape());
        Map(dx->data(), batch, in).noalias() = g * ConstMap(w.data(), out, in);
    }
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.storage()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    require_same_shape(x, dy, "relu backward");
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    return dx;
}

Tensor softmax_forward(const Tensor& x) {
    require_rank(x, 2, "softmax input");
    Tensor y(x.shape());
    const auto n = x.dim(1);
    for (std::int64_t r = 0; r < x.dim(0); ++r) {
        const double* in = x.data() + r * n;
        double* out = y.data() + r * n;
        double m = in[0];
        for (std::int64_t i = 1; i < n; ++i) m = std::max(m, in[i]);
        double z = 0.0;
        for (std::int64_t i = 0; i < n; ++i) z += (out[i] = std::exp(in[i] - m));
        for (std::int64_t i = 0; i < n; ++i) out[i] /= z;
    }
    return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
    require_same_shape(y, dy, "softmax backward");
    Tensor dx(y.shape());
    const auto n = y.dim(1);
    for (std::int64_t r = 0; r < y.dim(0); ++r) {
        double dot = 0.0;
        for (std::int64_t i = 0; i < n; ++i) dot += y[static_cast<std::size_t>(r * n + i)] * dy[static_cast<std::size_t>(r * n + i)];
        for (std::int64_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(r * n + i);
            dx[idx] = y[idx] * (dy[idx] - dot);
        }
    }
    return dx;
}

}  // namespace atl
