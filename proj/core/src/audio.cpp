#include "atl/audio.hpp"

#include "atl/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

namespace atl {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

constexpr int kSincZeroCrossings = 16;
constexpr double kKaiserBeta = 8.6;

double kaiser(double x, double i0_beta) {
    // x in [-1, 1]
    const double arg = 1.0 - x * x;
    if (arg <= 0.0) return 0.0;
    return std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(arg)) / i0_beta;
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace

Tensor Spectrogram::to_tensor() const {
    return Tensor({1, frames, bins}, values);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (clip.samples.empty()) throw ConfigError("resample: empty clip");
    if (clip.sample_rate <= 0 || target_rate <= 0) throw ConfigError("resample: sample rates must be positive");
    if (clip.sample_rate == target_rate) return clip;

    const long g = std::gcd(clip.sample_rate, target_rate);
    const long up = target_rate / g;
    const long down = clip.sample_rate / g;
    const double ratio = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
    const double half_width = kSincZeroCrossings / ratio;  // in input samples
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);

    const auto n_in = static_cast<long>(clip.samples.size());
    const long n_out = (n_in * up + down - 1) / down;
    AudioClip out = clip;
    out.sample_rate = target_rate;
    out.samples.assign(static_cast<std::size_t>(n_out), 0.0);
    for (long n = 0; n < n_out; ++n) {
        // Output sample n sits at input position n * down / up.
        const long num = n * down;
        const long base = num / up;
        const double frac = static_cast<double>(num % up) / static_cast<double>(up);
        const double t = static_cast<double>(base) + frac;
        const long k0 = static_cast<long>(std::ceil(t - half_width));
        const long k1 = static_cast<long>(std::floor(t + half_width));
        double acc = 0.0, norm = 0.0;
        for (long k = k0; k <= k1; ++k) {
            const double tau = t - static_cast<double>(k);
            const double h = ratio * sinc(ratio * tau) * kaiser(tau / half_width, i0_beta);
            const long idx = std::clamp(k, 0L, n_in - 1);
            acc += h * clip.samples[static_cast<std::size_t>(idx)];
            norm += h;
        }
        out.samples[static_cast<std::size_t>(n)] = acc / norm;
    }
    return out;
}

std::vector<AudioClip> segment_or_pad(const AudioClip& clip, double duration_s) {
    if (!(duration_s > 0.0)) throw ConfigError("segment duration must be > 0");
    const auto seg = static_cast<std::size_t>(std::llround(duration_s * clip.sample_rate));
    if (seg == 0) throw ConfigError("segment duration shorter than one sample");
    const std::size_t n = clip.samples.size();
    const std::size_t count = std::max<std::size_t>(1, (n + seg - 1) / seg);
    std::vector<AudioClip> pieces;
    pieces.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        AudioClip piece = clip;
        piece.samples.assign(seg, 0.0);
        const std::size_t begin = i * seg;
        const std::size_t end = std::min(n, begin + seg);
        if (begin < end) std::copy(clip.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                   clip.samples.begin() + static_cast<std::ptrdiff_t>(end), piece.samples.begin());
        pieces.push_back(std::move(piece));
    }
    return pieces;
}

std::vector<double> hamming_periodic(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

Spectrogram stft_magnitude(const AudioClip& clip, const StftOptions& options) {
    if (!(options.overlap >= 0.0 && options.overlap < 1.0)) throw ConfigError("STFT overlap must be in [0,1)");
    const int win = static_cast<int>(std::lround(options.window_ms * clip.sample_rate / 1000.0));
    const int hop = win - static_cast<int>(std::lround(win * options.overlap));
    if (win < 2 || hop < 1) throw ConfigError("STFT window too short for the sample rate");
    const auto n = static_cast<long>(clip.samples.size());
    const int pad = options.center ? win / 2 : 0;
    if (options.center ? n <= pad : n < win) {
        throw ConfigError("clip of " + std::to_string(n) + " samples is too short for an STFT window of " +
                          std::to_string(win));
    }
    std::vector<double> padded;
    const std::vector<double>* source = &clip.samples;
    if (pad > 0) {
        padded.resize(static_cast<std::size_t>(n + 2 * pad));
        for (long i = 0; i < n + 2 * pad; ++i) {
            long j = i - pad;
            if (j < 0) j = -j;
            if (j >= n) j = 2 * (n - 1) - j;
            padded[static_cast<std::size_t>(i)] = clip.samples[static_cast<std::size_t>(j)];
        }
        source = &padded;
    }
    const auto total = static_cast<long>(source->size());

    Spectrogram s;
    s.window = win;
    s.hop = hop;
    s.sample_rate = clip.sample_rate;
    s.frames = static_cast<int>((total - win) / hop + 1);
    s.bins = win / 2 + 1;
    s.log_magnitude = options.log_magnitude;
    s.values.resize(static_cast<std::size_t>(s.frames) * s.bins);

    const auto window = hamming_periodic(win);
    double* in = fftw_alloc_real(static_cast<std::size_t>(win));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(s.bins));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(win, in, out, FFTW_ESTIMATE);
    }
    for (int f = 0; f < s.frames; ++f) {
        const auto* frame = source->data() + static_cast<std::ptrdiff_t>(f) * hop;
        for (int i = 0; i < win; ++i) in[i] = frame[i] * window[static_cast<std::size_t>(i)];
        fftw_execute(plan);
        for (int b = 0; b < s.bins; ++b) {
            double mag = std::hypot(out[b][0], out[b][1]);
            if (options.log_magnitude) mag = std::log(mag + 1e-6);
            s.values[static_cast<std::size_t>(f) * s.bins + b] = mag;
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return s;
}

namespace {

NormStats finish_stats(double mean, double squared_deviation, double count) {
    NormStats st;
    st.mean = mean;
    st.std = std::sqrt(squared_deviation / count);
    if (!(st.std > 0.0)) throw NumericError("training split has zero standard deviation; cannot normalize");
    return st;
}

}  // namespace

NormStats compute_norm_stats(std::span<const Spectrogram> training) {
    double sum = 0.0, count = 0.0;
    for (const auto& s : training) {
        for (double v : s.values) sum += v;
        count += static_cast<double>(s.values.size());
    }
    if (count <= 0) throw ConfigError("normalization statistics need at least one value");
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& s : training) {
        for (double v : s.values) sq += (v - mean) * (v - mean);
    }
    return finish_stats(mean, sq, count);
}

NormStats compute_norm_stats(const Tensor& training) {
    double sum = 0.0;
    for (double v : training.storage()) sum += v;
    const auto count = static_cast<double>(training.size());
    if (count <= 0) throw ConfigError("normalization statistics need at least one value");
    const double mean = sum / count;
    double sq = 0.0;
    for (double v : training.storage()) sq += (v - mean) * (v - mean);
    return finish_stats(mean, sq, count);
}

void normalize(std::span<Spectrogram> spectrograms, const NormStats& stats) {
    if (!(stats.std > 0.0)) throw NumericError("normalization std must be > 0");
    for (auto& s : spectrograms) {
        for (double& v : s.values) v = (v - stats.mean) / stats.std;
    }
}

void normalize(Tensor& values, const NormStats& stats) {
    if (!(stats.std > 0.0)) throw NumericError("normalization std must be > 0");
    for (double& v : values.storage()) v = (v - stats.mean) / stats.std;
}

void denormalize(Tensor& values, const NormStats& stats) {
    for (double& v : values.storage()) v = v * stats.std + stats.mean;
}

std::vector<Spectrogram> preprocess(const AudioClip& clip, double duration_s, const StftOptions& options) {
    std::vector<Spectrogram> out;
    for (const auto& piece : segment_or_pad(resample(clip, kTargetSampleRate), duration_s)) {
        out.push_back(stft_magnitude(piece, options));
    }
    return out;
}

}  // namespace atl
