#pragma once

#include "atl/network.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace atl {

enum class Upsample { bilinear, nearest };

/// Class activation map sized to the network input (rows x cols).
struct Heatmap {
    int rows = 0;
    int cols = 0;
    int class_index = 0;
    int layer = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double max() const;
};

/// Grad-CAM for one input ([C,H,W] or [1,C,H,W]) at conv `layer` (1-based).
/// The score is network output `class_index` (presets emit logits).
Heatmap gradcam(const Network& network, const Tensor& input, int class_index, int layer,
                Upsample upsample = Upsample::bilinear);

/// Unnormalized ReLU(sum_k alpha_k A^k) at the layer's own resolution.
Tensor gradcam_raw(const Network& network, const Tensor& input, int class_index, int layer);

/// Resizes a [H,W] map to rows x cols (align-corners=false sampling).
std::vector<double> resize(const Tensor& map, int rows, int cols, Upsample mode);

struct RenderPaths {
    std::filesystem::path spectrogram;
    std::filesystem::path heatmap;
    std::filesystem::path overlay;
};

/// Writes `<stem>_spec.pgm`, `<stem>_heatmap.pgm` and `<stem>_overlay.pgm`.
/// `spectrogram` is [rows, cols] or any shape with rows*cols values.
RenderPaths render(const Heatmap& heatmap, const Tensor& spectrogram, const std::filesystem::path& stem);

/// Raw heatmap values, one row per line.
void write_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path);

}  // namespace atl
