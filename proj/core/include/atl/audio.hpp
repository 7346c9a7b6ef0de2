#pragma once

#include "atl/tensor.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace atl {

/// Mono audio with its labels (-1 when a label is absent).
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = 16000;
    int target = -1;
    int orth1 = -1;
    int orth2 = -1;
};

/// frames x bins magnitude matrix, row-major.
struct Spectrogram {
    int frames = 0;
    int bins = 0;
    int window = 0;
    int hop = 0;
    int sample_rate = 0;
    bool log_magnitude = false;
    std::vector<double> values;

    double at(int frame, int bin) const { return values[static_cast<std::size_t>(frame) * bins + bin]; }
    /// [1, frames, bins] network input.
    Tensor to_tensor() const;
};

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
};

inline constexpr int kTargetSampleRate = 16000;

/// Windowed-sinc (Kaiser) rational resampler. Taps are renormalized per
/// output sample and the signal is edge-extended, so DC passes unchanged.
/// Returns the clip untouched when the rate already matches.
AudioClip resample(const AudioClip& clip, int target_rate = kTargetSampleRate);

/// Cuts the clip into consecutive non-overlapping pieces of `duration_s`;
/// the last (or only) piece is right-padded with zeros.
std::vector<AudioClip> segment_or_pad(const AudioClip& clip, double duration_s);

struct StftOptions {
    double window_ms = 16.0;
    double overlap = 0.5;
    bool log_magnitude = false;
    /// Reflect-pad half a window on both sides so frame f is centred on
    /// sample f * hop.
    bool center = true;
};

/// Periodic Hamming window (alpha = 0.54) of length n.
std::vector<double> hamming_periodic(int n);

/// Magnitude STFT, FFT size equal to the window length, phase discarded.
/// frames = floor(N / hop) + 1 when centred, floor((N - window) / hop) + 1
/// otherwise; bins = window / 2 + 1.
Spectrogram stft_magnitude(const AudioClip& clip, const StftOptions& options = {});

NormStats compute_norm_stats(std::span<const Spectrogram> training);
NormStats compute_norm_stats(const Tensor& training);
/// (v - mean) / std on every value.
void normalize(std::span<Spectrogram> spectrograms, const NormStats& stats);
void normalize(Tensor& values, const NormStats& stats);
void denormalize(Tensor& values, const NormStats& stats);

/// Resample to 16 kHz, cut into 1 s pieces, STFT each one.
std::vector<Spectrogram> preprocess(const AudioClip& clip, double duration_s = 1.0, const StftOptions& options = {});

// RIFF/WAV. PCM16, PCM24 and float32 are read; multi-channel audio is
// averaged to mono.
AudioClip read_wav(const std::filesystem::path& path);
enum class WavFormat { pcm16, float32 };
void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavFormat format = WavFormat::pcm16);

}  // namespace atl
