#include "atl/synthdata.hpp"

#include "atl/errors.hpp"
#include "atl/rng.hpp"
#include "atl/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace atl {

void SynthSpec::validate() const {
    if (target_classes < 2 || orth_classes < 2) throw ConfigError("synth: class counts must be >= 2");
    if (train_samples < 1 || val_samples < 1 || test_samples < 1) throw ConfigError("synth: every split needs samples");
    if (!(train_correlation >= 0.0 && train_correlation <= 1.0)) throw ConfigError("synth: train correlation must be in [0,1]");
    if (!(test_correlation >= 0.0 && test_correlation <= 1.0)) throw ConfigError("synth: test correlation must be in [0,1]");
    if (!(noise >= 0.0)) throw ConfigError("synth: noise must be >= 0");
    if (target_jitter < 0) throw ConfigError("synth: target jitter must be >= 0");
    if (bins / 2 < 2 * target_classes) {
        throw ConfigError("synth: " + std::to_string(bins) + " bins cannot hold " + std::to_string(target_classes) +
                          " target classes");
    }
    if (frames < 2 + (orth_classes - 1) + 1) throw ConfigError("synth: too few frames for the orthogonal classes");
}

int paired_orth_class(int target_class, int orth_classes) { return target_class % orth_classes; }

namespace {

struct Geometry {
    int split_bin;   // target family lives below, orthogonal family at or above
    int slot_width;  // 2 * target_classes slots below split_bin
    int band_width;
    int period_step;
};

Geometry geometry(const SynthSpec& s) {
    Geometry g;
    g.split_bin = s.bins / 2;
    g.slot_width = g.split_bin / (2 * s.target_classes);
    g.band_width = std::max(1, g.slot_width / 2);
    g.period_step = std::max(1, s.frames / (4 * s.orth_classes));
    return g;
}

Tensor render(const SynthSpec& s, const Geometry& g, int k, int m, Rng& rng) {
    Tensor img(Shape{1, s.frames, s.bins});
    double* px = img.data();
    const auto at = [&](int f, int b) -> double& { return px[static_cast<std::size_t>(f) * s.bins + b]; };

    const int shift = s.target_jitter > 0
                          ? static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * s.target_jitter + 1))) - s.target_jitter
                          : 0;
    for (int slot : {k, k + s.target_classes}) {
        const int start = slot * g.slot_width + (g.slot_width - g.band_width) / 2 + shift;
        for (int b = std::max(0, start); b < std::min(g.split_bin, start + g.band_width); ++b) {
            for (int f = 0; f < s.frames; ++f) at(f, b) += s.target_amplitude;
        }
    }

    const int period = 2 + m * g.period_step;
    const int phase = static_cast<int>(rng.below(static_cast<std::uint64_t>(period)));
    for (int f = phase; f < s.frames; f += period) {
        for (int b = g.split_bin; b < s.bins; ++b) at(f, b) += s.orth_amplitude;
    }

    if (s.noise > 0.0) {
        for (double& v : img.values()) v += s.noise * rng.normal();
    }
    return img;
}

Dataset make_split(const SynthSpec& s, int count, double correlation, std::uint64_t stream) {
    const Geometry g = geometry(s);
    std::vector<Tensor> samples;
    std::vector<int> target, orth;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(derive_seed(s.seed, stream), static_cast<std::uint64_t>(i)));
        const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.target_classes)));
        const int m = rng.bernoulli(correlation) ? paired_orth_class(k, s.orth_classes)
                                                 : static_cast<int>(rng.below(static_cast<std::uint64_t>(s.orth_classes)));
        samples.push_back(render(s, g, k, m, rng));
        target.push_back(k);
        orth.push_back(m);
    }
    return make_dataset(samples, std::move(target), std::move(orth));
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    return {make_split(spec, spec.train_samples, spec.train_correlation, 1),
            make_split(spec, spec.val_samples, spec.train_correlation, 2),
            make_split(spec, spec.test_samples, spec.test_correlation, 3)};
}

Dataset mask_family(const Dataset& data, Family family) {
    if (data.inputs.rank() != 4) throw ShapeError("mask_family expects [N,C,H,W] inputs");
    Dataset out = data;
    const auto n = data.inputs.dim(0), c = data.inputs.dim(1), h = data.inputs.dim(2), w = data.inputs.dim(3);
    const auto split = w / 2;
    const auto lo = family == Family::target ? std::int64_t{0} : split;
    const auto hi = family == Family::target ? split : w;
    for (std::int64_t i = 0; i < n * c * h; ++i) {
        double* row = out.inputs.data() + i * w;
        std::fill(row + lo, row + hi, 0.0);
    }
    return out;
}

double cramers_v(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ShapeError("cramers_v: label vectors differ in length");
    if (a.empty()) return 0.0;
    const int ra = *std::max_element(a.begin(), a.end()) + 1;
    const int rb = *std::max_element(b.begin(), b.end()) + 1;
    std::vector<double> table(static_cast<std::size_t>(ra * rb), 0.0), row(static_cast<std::size_t>(ra), 0.0),
        col(static_cast<std::size_t>(rb), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[static_cast<std::size_t>(a[i] * rb + b[i])] += 1.0;
        row[static_cast<std::size_t>(a[i])] += 1.0;
        col[static_cast<std::size_t>(b[i])] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double chi2 = 0.0;
    int used_rows = 0, used_cols = 0;
    for (double r : row) used_rows += r > 0;
    for (double c : col) used_cols += c > 0;
    for (int i = 0; i < ra; ++i) {
        for (int j = 0; j < rb; ++j) {
            const double expected = row[static_cast<std::size_t>(i)] * col[static_cast<std::size_t>(j)] / n;
            if (expected > 0) {
                const double d = table[static_cast<std::size_t>(i * rb + j)] - expected;
                chi2 += d * d / expected;
            }
        }
    }
    const int dof = std::min(used_rows, used_cols) - 1;
    if (dof <= 0) return 0.0;
    return std::sqrt(chi2 / (n * dof));
}

SeparabilityReport verify_separability(const SynthSpec& spec, const SeparabilityOptions& options) {
    SynthSpec flat = spec;
    flat.train_correlation = 0.0;
    flat.test_correlation = 0.0;
    const auto data = generate(flat);
    const Splits splits{data.train, data.val, data.test};

    TrainConfig config;
    config.max_epochs = options.max_epochs;
    config.patience = options.patience;
    config.seed = options.seed;

    SeparabilityReport report;
    report.threshold = options.threshold;
    config.label = LabelKey::target;
    report.target_accuracy = train(config, splits).test_accuracy;
    config.label = LabelKey::orth1;
    report.orth_accuracy = train(config, splits).test_accuracy;
    report.usable = report.target_accuracy > options.threshold && report.orth_accuracy > options.threshold;
    return report;
}

}  // namespace atl
