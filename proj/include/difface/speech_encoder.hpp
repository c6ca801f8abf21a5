#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "difface/audio.hpp"
#include "difface/seq_data.hpp"

namespace difface {

// T_a x F speech embeddings at the encoder's native rate.
struct SpeechFeatureSequence {
    Matrix features;
    double feature_rate = 50.0;
};

struct EncoderSettings {
    std::string name = "stub";  // stub | reference-pretrained | alternate-pretrained
    int feature_dim = 32;
    std::filesystem::path weights_path;
    bool finetune = false;
};

// Frozen speech representation backend. Implementations are immutable after
// construction, so encode() may be called concurrently.
class SpeechEncoder {
public:
    virtual ~SpeechEncoder() = default;
    virtual std::string name() const = 0;
    virtual int feature_dim() const = 0;
    virtual double feature_rate() const = 0;
    // Number of feature rows produced for a clip of `num_samples` at 16 kHz.
    virtual Eigen::Index output_length(std::size_t num_samples) const = 0;
    virtual SpeechFeatureSequence encode(const AudioClip& clip) const = 0;
};

// Output length of the 7-layer strided convolution front end shared by
// HuBERT / wav2vec2 (kernels 10,3,3,3,3,2,2; strides 5,2,2,2,2,2,2).
Eigen::Index conv_frontend_output_length(std::size_t num_samples);

// Deterministic signal-statistics backend: 400-sample Hann windows every 320
// samples (50 Hz), F = 32: RMS energy plus 31 log-spaced band magnitudes.
class StubEncoder final : public SpeechEncoder {
public:
    static constexpr int kFeatureDim = 32;
    static constexpr int kWindow = 400;
    static constexpr int kHop = 320;

    std::string name() const override { return "stub"; }
    int feature_dim() const override { return kFeatureDim; }
    double feature_rate() const override { return static_cast<double>(kEncoderSampleRate) / kHop; }
    Eigen::Index output_length(std::size_t num_samples) const override;
    SpeechFeatureSequence encode(const AudioClip& clip) const override;
};

// Backend for pretrained speech models whose features are extracted offline
// (tools/extract_features.py). Reads `<weights_path>/<clip.id>.feat`.
class PrecomputedEncoder final : public SpeechEncoder {
public:
    PrecomputedEncoder(std::string name, int feature_dim, std::filesystem::path feature_dir);

    std::string name() const override { return name_; }
    int feature_dim() const override { return feature_dim_; }
    double feature_rate() const override { return 50.0; }
    Eigen::Index output_length(std::size_t num_samples) const override {
        return conv_frontend_output_length(num_samples);
    }
    SpeechFeatureSequence encode(const AudioClip& clip) const override;

private:
    std::string name_;
    int feature_dim_;
    std::filesystem::path feature_dir_;
};

// Throws ConfigError for an unknown name, or when pretrained weights are missing
// (the message points at the stub backend).
std::unique_ptr<SpeechEncoder> make_encoder(const EncoderSettings& settings);

SpeechFeatureSequence stub_encode(const AudioClip& clip);

// Requires a 16 kHz clip; checks the backend's output for shape and finiteness.
SpeechFeatureSequence encode_audio(const AudioClip& clip, const SpeechEncoder& backend);

// Linearly interpolates the feature rows onto n_frames rows; the first and last
// rows map onto the first and last feature rows. n_frames == T_a is the identity.
Matrix align_to_frames(const SpeechFeatureSequence& seq, Eigen::Index n_frames);

}  // namespace difface
