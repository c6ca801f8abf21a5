#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace difface {

inline constexpr int kEncoderSampleRate = 16000;

// Mono waveform. `id` names the clip (usually the file stem) and is what
// precomputed-feature backends look up.
struct AudioClip {
    std::vector<double> samples;
    int sample_rate = kEncoderSampleRate;
    std::string id;

    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Linear-interpolation resampler. Output length is round(n * to / from).
std::vector<double> resample_linear(const std::vector<double>& samples, int from_rate,
                                    int to_rate);

// Reads PCM 8/16/24/32-bit or IEEE float 32/64-bit WAV, downmixes to mono and
// resamples to 16 kHz. Throws DataError on malformed input.
AudioClip read_wav(const std::filesystem::path& path);

// Writes 32-bit float mono WAV at the clip's sample rate.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

}  // namespace difface
