#pragma once

#include "atl/dataset.hpp"

#include <cstdint>
#include <string>

namespace atl {

/// Two-factor synthetic "spectrograms" (frames x bins).
///
/// The target class k draws a stack of horizontal bands (fixed frequency
/// bins) in the low-frequency half; the orthogonal class m draws periodic
/// broadband spikes (fixed frames) in the high-frequency half. Gaussian
/// noise covers the whole image. With probability `train_correlation` the
/// orthogonal class of a training/validation sample is paired with its
/// target class (m = k mod orth_classes), otherwise it is uniform.
struct SynthSpec {
    int target_classes = 4;
    int orth_classes = 4;
    int train_samples = 600;
    int val_samples = 200;
    int test_samples = 200;
    double train_correlation = 0.9;
    double test_correlation = 0.0;
    int frames = 126;
    int bins = 129;
    double noise = 0.1;
    double target_amplitude = 1.0;
    double orth_amplitude = 1.0;
    /// Random shift (in bins) applied to every target band of a sample.
    int target_jitter = 0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SynthDataset {
    Dataset train;
    Dataset val;
    Dataset test;
};

SynthDataset generate(const SynthSpec& spec);

/// Pairing used when a sample's orthogonal label follows its target label.
int paired_orth_class(int target_class, int orth_classes);

enum class Family { target, orth };

/// Zeroes every pixel the given pattern family can occupy.
Dataset mask_family(const Dataset& data, Family family);

/// Cramer's V between target and orthogonal labels of a dataset.
double cramers_v(const std::vector<int>& a, const std::vector<int>& b);

struct SeparabilityReport {
    double target_accuracy = 0.0;
    double orth_accuracy = 0.0;
    double threshold = 0.9;
    bool usable = false;
};

struct SeparabilityOptions {
    int max_epochs = 30;
    int patience = 5;
    std::uint64_t seed = 1;
    double threshold = 0.9;
};

/// Trains vgg-tiny on the target labels alone and on the orthogonal labels
/// alone, both on uncorrelated data generated from `spec`, and reports test
/// accuracies. `usable` is set when both exceed the threshold.
SeparabilityReport verify_separability(const SynthSpec& spec, const SeparabilityOptions& options = {});

}  // namespace atl
