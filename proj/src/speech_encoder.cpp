#include "difface/speech_encoder.hpp"

#include <cmath>
#include <numbers>

#include "difface/errors.hpp"
#include "difface/motion_io.hpp"

namespace difface {

Eigen::Index conv_frontend_output_length(std::size_t num_samples) {
    constexpr int kernels[] = {10, 3, 3, 3, 3, 2, 2};
    constexpr int strides[] = {5, 2, 2, 2, 2, 2, 2};
    long long len = static_cast<long long>(num_samples);
    for (int i = 0; i < 7; ++i) {
        len = len < kernels[i] ? 0 : (len - kernels[i]) / strides[i] + 1;
    }
    return static_cast<Eigen::Index>(len);
}

Eigen::Index StubEncoder::output_length(std::size_t num_samples) const {
    if (num_samples <= static_cast<std::size_t>(kWindow)) return 1;
    return static_cast<Eigen::Index>((num_samples - kWindow) / kHop + 1);
}

SpeechFeatureSequence StubEncoder::encode(const AudioClip& clip) const {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    constexpr int bands = kFeatureDim - 1;

    static const auto tables = [] {
        struct Tables {
            std::vector<double> window;
            std::vector<double> cos_t;  // bands x kWindow
            std::vector<double> sin_t;
            double window_sum = 0.0;
        } t;
        t.window.resize(kWindow);
        for (int i = 0; i < kWindow; ++i) {
            t.window[i] = 0.5 - 0.5 * std::cos(two_pi * i / (kWindow - 1));
            t.window_sum += t.window[i];
        }
        t.cos_t.resize(static_cast<std::size_t>(bands) * kWindow);
        t.sin_t.resize(t.cos_t.size());
        for (int b = 0; b < bands; ++b) {
            // Log-spaced centres from 80 Hz to 7600 Hz.
            const double hz = 80.0 * std::pow(7600.0 / 80.0, static_cast<double>(b) / (bands - 1));
            const double w = two_pi * hz / kEncoderSampleRate;
            for (int i = 0; i < kWindow; ++i) {
                t.cos_t[static_cast<std::size_t>(b) * kWindow + i] = std::cos(w * i) * t.window[i];
                t.sin_t[static_cast<std::size_t>(b) * kWindow + i] = std::sin(w * i) * t.window[i];
            }
        }
        return t;
    }();

    const Eigen::Index rows = output_length(clip.samples.size());
    SpeechFeatureSequence out;
    out.feature_rate = feature_rate();
    out.features = Matrix::Zero(rows, kFeatureDim);
    std::vector<double> frame(kWindow);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t start = static_cast<std::size_t>(r) * kHop;
        double energy = 0.0;
        for (int i = 0; i < kWindow; ++i) {
            const std::size_t k = start + i;
            frame[i] = k < clip.samples.size() ? clip.samples[k] : 0.0;
            energy += frame[i] * frame[i];
        }
        out.features(r, 0) = std::sqrt(energy / kWindow);
        for (int b = 0; b < bands; ++b) {
            double re = 0.0, im = 0.0;
            const double* c = &tables.cos_t[static_cast<std::size_t>(b) * kWindow];
            const double* s = &tables.sin_t[static_cast<std::size_t>(b) * kWindow];
            for (int i = 0; i < kWindow; ++i) {
                re += frame[i] * c[i];
                im += frame[i] * s[i];
            }
            out.features(r, b + 1) = 2.0 * std::sqrt(re * re + im * im) / tables.window_sum;
        }
    }
    return out;
}

PrecomputedEncoder::PrecomputedEncoder(std::string name, int feature_dim,
                                       std::filesystem::path feature_dir)
    : name_(std::move(name)), feature_dim_(feature_dim), feature_dir_(std::move(feature_dir)) {
    if (feature_dim_ < 1) throw ConfigError("encoder.feature_dim must be >= 1");
    if (feature_dir_.empty() || !std::filesystem::is_directory(feature_dir_)) {
        throw ConfigError("encoder '" + name_ + "' is unavailable: weights/feature directory '" +
                          feature_dir_.string() +
                          "' not found; run tools/extract_features.py or set encoder.name=stub");
    }
}

SpeechFeatureSequence PrecomputedEncoder::encode(const AudioClip& clip) const {
    const auto path = feature_dir_ / (clip.id + ".feat");
    if (!std::filesystem::exists(path)) {
        throw DataError("no precomputed " + name_ + " features for clip '" + clip.id + "' at '" +
                        path.string() + "'");
    }
    const auto seq = read_motion(path);
    if (seq.frames.cols() != feature_dim_) {
        throw DataError("feature file '" + path.string() + "' has width " +
                        std::to_string(seq.frames.cols()) + ", expected " +
                        std::to_string(feature_dim_));
    }
    return {seq.frames, seq.fps > 0 ? seq.fps : feature_rate()};
}

std::unique_ptr<SpeechEncoder> make_encoder(const EncoderSettings& settings) {
    if (settings.name == "stub") {
        if (settings.feature_dim != StubEncoder::kFeatureDim) {
            throw ConfigError("stub encoder has feature_dim 32, config says " +
                              std::to_string(settings.feature_dim));
        }
        return std::make_unique<StubEncoder>();
    }
    if (settings.name == "reference-pretrained" || settings.name == "alternate-pretrained") {
        if (settings.finetune) {
            throw ConfigError("encoder.finetune is not supported for precomputed features");
        }
        return std::make_unique<PrecomputedEncoder>(settings.name, settings.feature_dim,
                                                    settings.weights_path);
    }
    throw ConfigError("unknown encoder '" + settings.name +
                      "' (expected stub, reference-pretrained or alternate-pretrained)");
}

SpeechFeatureSequence stub_encode(const AudioClip& clip) { return StubEncoder().encode(clip); }

SpeechFeatureSequence encode_audio(const AudioClip& clip, const SpeechEncoder& backend) {
    if (clip.sample_rate != kEncoderSampleRate) {
        throw ContractError("encode_audio expects 16 kHz audio, got " +
                            std::to_string(clip.sample_rate) + " Hz");
    }
    auto out = backend.encode(clip);
    if (out.features.rows() < 1) throw DataError("encoder produced no feature rows");
    if (out.features.cols() != backend.feature_dim()) {
        throw DataError("encoder produced width " + std::to_string(out.features.cols()) +
                        ", expected " + std::to_string(backend.feature_dim()));
    }
    if (!out.features.allFinite()) throw NumericError("encoder produced non-finite features");
    return out;
}

Matrix align_to_frames(const SpeechFeatureSequence& seq, Eigen::Index n_frames) {
    const Eigen::Index t_a = seq.features.rows();
    if (t_a == 0) throw DataError("align_to_frames: empty feature sequence");
    if (n_frames < 1) throw ContractError("align_to_frames: n_frames must be >= 1");
    if (n_frames == t_a) return seq.features;
    Matrix out(n_frames, seq.features.cols());
    for (Eigen::Index n = 0; n < n_frames; ++n) {
        const double pos = n_frames == 1 ? 0.5 * static_cast<double>(t_a - 1)
                                         : static_cast<double>(n) * static_cast<double>(t_a - 1) /
                                               static_cast<double>(n_frames - 1);
        const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(pos), t_a - 1);
        const Eigen::Index hi = std::min<Eigen::Index>(lo + 1, t_a - 1);
        const double frac = pos - static_cast<double>(lo);
        out.row(n) = (1.0 - frac) * seq.features.row(lo) + frac * seq.features.row(hi);
    }
    return out;
}

}  // namespace difface
