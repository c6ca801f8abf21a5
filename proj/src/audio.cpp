#include "difface/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "difface/errors.hpp"

namespace difface {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

double decode_sample(const unsigned char* p, int format, int bits) {
    if (format == 3) {
        if (bits == 32) {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    switch (bits) {
        case 8:
            return (static_cast<int>(p[0]) - 128) / 128.0;
        case 16:
            return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
        case 24: {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xFFFFFF;
            return v / 8388608.0;
        }
        default:
            return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
    }
}

}  // namespace

std::vector<double> resample_linear(const std::vector<double>& samples, int from_rate,
                                    int to_rate) {
    if (from_rate <= 0 || to_rate <= 0) throw DataError("resample: sample rates must be positive");
    if (from_rate == to_rate || samples.empty()) return samples;
    const auto n_out = static_cast<std::size_t>(
        std::llround(static_cast<double>(samples.size()) * to_rate / from_rate));
    std::vector<double> out(std::max<std::size_t>(n_out, 1));
    const double step = static_cast<double>(from_rate) / to_rate;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double pos = i * step;
        const auto lo = static_cast<std::size_t>(pos);
        if (lo + 1 >= samples.size()) {
            out[i] = samples.back();
            continue;
        }
        const double frac = pos - lo;
        out[i] = samples[lo] * (1.0 - frac) + samples[lo + 1] * frac;
    }
    return out;
}

AudioClip read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open audio file '" + path.string() + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw DataError("'" + path.string() + "' is not a RIFF/WAVE file");
    }

    int format = 0, channels = 0, rate = 0, bits = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) {
            // Tolerate a truncated trailing data chunk.
            if (std::memcmp(chunk, "data", 4) == 0) {
                data = bytes.data() + body;
                data_size = bytes.size() - body;
            }
            break;
        }
        if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
            format = read_u16(chunk + 8);
            channels = read_u16(chunk + 10);
            rate = static_cast<int>(read_u32(chunk + 12));
            bits = read_u16(chunk + 22);
            if (format == 0xFFFE && size >= 40) format = read_u16(chunk + 32);  // extensible
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = size;
        }
        pos = body + size + (size & 1);
    }
    if (format == 0 || data == nullptr) {
        throw DataError("'" + path.string() + "' lacks fmt or data chunk");
    }
    if ((format != 1 && format != 3) || channels < 1 ||
        (format == 1 && bits != 8 && bits != 16 && bits != 24 && bits != 32) ||
        (format == 3 && bits != 32 && bits != 64) || rate <= 0) {
        throw DataError("'" + path.string() + "' uses an unsupported WAV encoding");
    }

    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
    const std::size_t n = data_size / frame_bytes;
    std::vector<double> mono(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int c = 0; c < channels; ++c) {
            acc += decode_sample(data + i * frame_bytes + c * (bits / 8), format, bits);
        }
        mono[i] = acc / channels;
    }

    AudioClip clip;
    clip.samples = resample_linear(mono, rate, kEncoderSampleRate);
    clip.sample_rate = kEncoderSampleRate;
    clip.id = path.stem().string();
    return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write audio file '" + path.string() + "'");
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 4);
    out.write("RIFF", 4);
    put_u32(out, 36 + data_bytes);
    out.write("WAVEfmt ", 8);
    put_u32(out, 16);
    put_u16(out, 3);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 4);
    put_u16(out, 4);
    put_u16(out, 32);
    out.write("data", 4);
    put_u32(out, data_bytes);
    for (double s : clip.samples) {
        const float f = static_cast<float>(s);
        out.write(reinterpret_cast<const char*>(&f), 4);
    }
}

}  // namespace difface
