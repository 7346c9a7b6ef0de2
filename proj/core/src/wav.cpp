#include "atl/audio.hpp"
#include "atl/errors.hpp"
#include "atl/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace atl {

namespace {

std::uint32_t u32(const std::string& b, std::size_t at) {
    std::uint32_t v;
    std::memcpy(&v, b.data() + at, 4);
    return v;
}

std::uint16_t u16(const std::string& b, std::size_t at) {
    std::uint16_t v;
    std::memcpy(&v, b.data() + at, 2);
    return v;
}

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

constexpr std::uint16_t kPcm = 1;
constexpr std::uint16_t kFloat = 3;
constexpr std::uint16_t kExtensible = 0xFFFE;

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
    const std::string b = read_file(path);
    const auto bad = [&](const std::string& why) { return FormatError(path.string() + ": " + why); };
    if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) throw bad("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    std::size_t data_at = 0, data_len = 0;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const std::string id = b.substr(pos, 4);
        const std::size_t len = u32(b, pos + 4);
        const std::size_t body = pos + 8;
        if (id == "fmt ") {
            if (len < 16 || body + len > b.size()) throw bad("truncated fmt chunk");
            format = u16(b, body);
            channels = u16(b, body + 2);
            rate = u32(b, body + 4);
            bits = u16(b, body + 14);
            if (format == kExtensible) {
                if (len < 40) throw bad("truncated extensible fmt chunk");
                format = u16(b, body + 24);
            }
        } else if (id == "data") {
            data_at = body;
            data_len = std::min(len, b.size() - body);
            break;
        }
        pos = body + len + (len & 1);
    }
    if (channels == 0 || rate == 0) throw bad("missing fmt chunk");
    if (data_at == 0) throw bad("missing data chunk");
    const bool pcm = format == kPcm && (bits == 16 || bits == 24);
    const bool flt = format == kFloat && bits == 32;
    if (!pcm && !flt) {
        throw bad("unsupported sample format (format " + std::to_string(format) + ", " + std::to_string(bits) +
                  " bits); expected PCM16, PCM24 or float32");
    }

    const std::size_t width = bits / 8;
    const std::size_t frames = data_len / (width * channels);
    AudioClip clip;
    clip.sample_rate = static_cast<int>(rate);
    clip.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const char* p = b.data() + data_at + (f * channels + c) * width;
            double v = 0.0;
            if (flt) {
                float x;
                std::memcpy(&x, p, 4);
                v = x;
            } else if (bits == 16) {
                std::int16_t x;
                std::memcpy(&x, p, 2);
                v = x / 32768.0;
            } else {
                std::int32_t x = static_cast<std::uint8_t>(p[0]) | (static_cast<std::uint8_t>(p[1]) << 8) |
                                 (static_cast<std::int32_t>(static_cast<std::int8_t>(p[2])) << 16);
                v = x / 8388608.0;
            }
            acc += v;
        }
        clip.samples[f] = acc / channels;
    }
    for (double v : clip.samples) {
        if (!std::isfinite(v)) throw bad("non-finite sample");
    }
    return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavFormat format) {
    const std::uint16_t bits = format == WavFormat::pcm16 ? 16 : 32;
    const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * bits / 8);
    std::string out = "RIFF";
    put<std::uint32_t>(out, 36 + data_len);
    out += "WAVEfmt ";
    put<std::uint32_t>(out, 16);
    put<std::uint16_t>(out, format == WavFormat::pcm16 ? kPcm : kFloat);
    put<std::uint16_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate) * bits / 8);
    put<std::uint16_t>(out, bits / 8);
    put<std::uint16_t>(out, bits);
    out += "data";
    put<std::uint32_t>(out, data_len);
    for (double v : clip.samples) {
        if (format == WavFormat::pcm16) {
            const double s = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
            put<std::int16_t>(out, static_cast<std::int16_t>(s));
        } else {
            put<float>(out, static_cast<float>(v));
        }
    }
    write_file_atomic(path, out);
}

}  // namespace atl
