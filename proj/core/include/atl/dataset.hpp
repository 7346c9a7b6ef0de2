#pragma once

#include "atl/audio.hpp"
#include "atl/tensor.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace atl {

enum class LabelKey { target, orth1, orth2 };

std::string_view to_string(LabelKey key);
LabelKey label_key_from_string(std::string_view name);

/// Labelled inputs stacked along axis 0 ([N,C,H,W]).
struct Dataset {
    Tensor inputs;
    std::vector<int> target;
    std::vector<int> orth1;
    /// Empty when the source has a single orthogonal label.
    std::vector<int> orth2;

    std::size_t size() const noexcept { return target.size(); }
    Shape sample_shape() const;
    const std::vector<int>& labels(LabelKey key) const;
    int num_classes(LabelKey key) const;
    Dataset subset(std::span<const std::size_t> indices) const;
    Tensor batch(std::span<const std::size_t> indices) const;
    std::vector<int> batch_labels(LabelKey key, std::span<const std::size_t> indices) const;
};

/// Stacks [C,H,W] (or [1,C,H,W]) samples into a dataset.
Dataset make_dataset(const std::vector<Tensor>& samples, std::vector<int> target, std::vector<int> orth1,
                     std::vector<int> orth2 = {});

/// One manifest line: `path,target_label,orth_label_1[,orth_label_2]`.
/// `path` is a WAV file or `<container>.atck#<tensor name>`.
struct ManifestRow {
    std::string path;
    int target = 0;
    int orth1 = 0;
    int orth2 = -1;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

/// Loads every row; WAV rows go through preprocess() and may expand to
/// several 1 s samples sharing the row's labels. Relative paths resolve
/// against the manifest's directory.
Dataset load_manifest(const std::filesystem::path& path, const StftOptions& stft = {}, double duration_s = 1.0);

/// Writes `<dir>/<name>.atck` (one tensor per sample) and `<dir>/<name>.csv`.
std::filesystem::path save_dataset(const Dataset& data, const std::filesystem::path& dir, const std::string& name);

}  // namespace atl
