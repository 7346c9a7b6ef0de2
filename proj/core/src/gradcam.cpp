#include "atl/gradcam.hpp"

#include "atl/errors.hpp"
#include "atl/pgm.hpp"
#include "atl/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace atl {

double Heatmap::max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

Tensor gradcam_raw(const Network& network, const Tensor& input, int class_index, int layer) {
    const ArchConfig& arch = network.arch();
    if (layer < 1 || layer > arch.conv_count()) {
        throw ConfigError("gradcam: layer " + std::to_string(layer) + " is not a conv layer (1.." +
                          std::to_string(arch.conv_count()) + ")");
    }
    if (class_index < 0 || class_index >= arch.num_classes) {
        throw ConfigError("gradcam: class " + std::to_string(class_index) + " out of range [0," +
                          std::to_string(arch.num_classes) + ")");
    }
    Tensor x = input;
    if (x.rank() == 3) x = x.reshaped(Shape{1, x.dim(0), x.dim(1), x.dim(2)});
    if (x.rank() != 4 || x.dim(0) != 1) throw ShapeError("gradcam expects one [C,H,W] input, got " + to_string(input.shape()));

    // Backward accumulates parameter gradients; keep the caller's network untouched.
    Network net = network;
    for (auto& p : net.parameters()) p.trainable = false;
    Tape tape;
    ForwardOptions fo;
    fo.taps = {layer};
    fo.tape = &tape;
    const auto fwd = net.forward(x, fo);
    Tensor seed(fwd.output.shape());
    seed[static_cast<std::size_t>(class_index)] = 1.0;
    const auto back = net.backward(tape, seed);

    const Tensor& a = fwd.taps.at(layer);
    const Tensor& g = back.tap_grads.at(layer);
    const auto channels = a.dim(1), h = a.dim(2), w = a.dim(3);
    const auto plane = static_cast<std::size_t>(h * w);
    Tensor map(Shape{h, w});
    for (std::int64_t k = 0; k < channels; ++k) {
        const double* gk = g.data() + static_cast<std::size_t>(k) * plane;
        const double* ak = a.data() + static_cast<std::size_t>(k) * plane;
        double alpha = 0.0;
        for (std::size_t i = 0; i < plane; ++i) alpha += gk[i];
        alpha /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) map[i] += alpha * ak[i];
    }
    for (double& v : map.values()) v = std::max(v, 0.0);
    return map;
}

std::vector<double> resize(const Tensor& map, int rows, int cols, Upsample mode) {
    if (map.rank() != 2) throw ShapeError("resize expects a [H,W] map");
    const auto h = map.dim(0), w = map.dim(1);
    std::vector<double> out(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    const double sy = static_cast<double>(h) / rows, sx = static_cast<double>(w) / cols;
    const auto src = [&](std::int64_t y, std::int64_t x) { return map[static_cast<std::size_t>(y * w + x)]; };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double v;
            if (mode == Upsample::nearest) {
                const auto y = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::floor((r + 0.5) * sy)));
                const auto x = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::floor((c + 0.5) * sx)));
                v = src(y, x);
            } else {
                const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
                const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
                const auto y0 = static_cast<std::int64_t>(fy), x0 = static_cast<std::int64_t>(fx);
                const auto y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
                const double ty = fy - static_cast<double>(y0), tx = fx - static_cast<double>(x0);
                v = (1 - ty) * ((1 - tx) * src(y0, x0) + tx * src(y0, x1)) + ty * ((1 - tx) * src(y1, x0) + tx * src(y1, x1));
            }
            out[static_cast<std::size_t>(r) * cols + c] = v;
        }
    }
    return out;
}

Heatmap gradcam(const Network& network, const Tensor& input, int class_index, int layer, Upsample upsample) {
    const Tensor raw = gradcam_raw(network, input, class_index, layer);
    const Shape& in = network.arch().input_shape;
    Heatmap hm;
    hm.rows = static_cast<int>(in[1]);
    hm.cols = static_cast<int>(in[2]);
    hm.class_index = class_index;
    hm.layer = layer;
    hm.values = resize(raw, hm.rows, hm.cols, upsample);
    const double peak = hm.max();
    if (peak > 0.0) {
        for (double& v : hm.values) v = std::max(0.0, v / peak);
    }
    return hm;
}

RenderPaths render(const Heatmap& heatmap, const Tensor& spectrogram, const std::filesystem::path& stem) {
    const auto n = static_cast<std::size_t>(heatmap.rows) * static_cast<std::size_t>(heatmap.cols);
    if (spectrogram.size() != n || heatmap.values.size() != n) {
        throw ShapeError("render: spectrogram " + to_string(spectrogram.shape()) + " does not match heatmap " +
                         std::to_string(heatmap.rows) + "x" + std::to_string(heatmap.cols));
    }
    const GrayImage spec = quantize(spectrogram.values(), heatmap.rows, heatmap.cols);
    const GrayImage heat = quantize_unit(heatmap.values, heatmap.rows, heatmap.cols);
    GrayImage overlay = spec;
    for (std::size_t i = 0; i < n; ++i) {
        const double h = heatmap.values[i];
        if (h > 0.0) {
            const auto band = static_cast<std::uint8_t>(128 + std::lround(127.0 * std::min(h, 1.0)));
            overlay.pixels[i] = std::max(overlay.pixels[i], band);
        }
    }
    RenderPaths paths{stem.string() + "_spec.pgm", stem.string() + "_heatmap.pgm", stem.string() + "_overlay.pgm"};
    write_pgm(paths.spectrogram, spec);
    write_pgm(paths.heatmap, heat);
    write_pgm(paths.overlay, overlay);
    return paths;
}

void write_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path) {
    std::ostringstream os;
    char buf[32];
    for (int r = 0; r < heatmap.rows; ++r) {
        for (int c = 0; c < heatmap.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.9g", heatmap.at(r, c));
            os << (c ? "," : "") << buf;
        }
        os << '\n';
    }
    write_file_atomic(path, os.str());
}

}  // namespace atl
