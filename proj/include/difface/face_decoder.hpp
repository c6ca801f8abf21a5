#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "difface/nn.hpp"
#include "difface/seq_data.hpp"

namespace difface {

enum class DecoderVariant { kGru, kRnn, kTransformerTf, kTransformerAr };
enum class NoiseEncoderVariant { kMlp, kConvMax, kConvAvg, kConvMaxX3, kConvAvgX3, kNone };

std::string to_string(DecoderVariant v);
std::string to_string(NoiseEncoderVariant v);
DecoderVariant decoder_variant_from_string(const std::string& s);
NoiseEncoderVariant noise_encoder_from_string(const std::string& s);

struct DecoderConfig {
    MotionKind kind = MotionKind::kRig;
    int output_dim = 0;           // D: 3V or C
    int audio_dim = 32;           // F
    int input_embedding_dim = 0;  // E, vertex kind only
    int layers = 2;
    int hidden_size = 256;
    double dropout = 0.3;
    DecoderVariant decoder = DecoderVariant::kGru;
    NoiseEncoderVariant noise_encoder = NoiseEncoderVariant::kNone;
    int t_emb_dim = 128;
    int num_styles = 0;  // 0 disables style conditioning
    int heads = 4;       // transformer variants
    bool style_every_layer = false;

    // Throws ConfigError on inconsistent settings.
    void validate() const;
    // Width of the per-frame noise slot: E (vertex) or D (rig).
    int noise_width() const;
    // F + noise_width + t_emb_dim.
    int fused_width() const;

    nlohmann::json to_json() const;
    static DecoderConfig from_json(const nlohmann::json& j);
};

// One-hot subject selector plus the learned |S| x H table it indexes.
struct StyleCondition {
    Eigen::VectorXd onehot;
    Matrix embedding_table;

    // Throws ContractError unless exactly one entry is active.
    int index() const;
    static StyleCondition select(int index, const Matrix& table);
};

// Sinusoidal encoding of the diffusion level, 1 x dim.
Matrix timestep_embedding(int t, int dim);

// Per-frame [audio | noise_latent | t_emb]; t_emb is broadcast to every frame.
Matrix fuse_inputs(const Matrix& audio, const Matrix& noise_latent, const Matrix& t_emb);

// hidden.row(n) .* table.row(style)
Matrix apply_style(const Matrix& hidden, const StyleCondition& style);

// Predicts clean motion x0 from aligned audio features, noised motion and the
// diffusion level: noise encoder (vertex data) -> fusion -> recurrent or
// transformer decoder -> optional style product -> affine output.
class FaceDecoder {
public:
    FaceDecoder(DecoderConfig cfg, std::uint64_t seed);
    FaceDecoder(const FaceDecoder&) = delete;
    FaceDecoder& operator=(const FaceDecoder&) = delete;
    ~FaceDecoder();

    const DecoderConfig& config() const { return cfg_; }
    ag::ParameterStore& parameters() { return store_; }
    const ag::ParameterStore& parameters() const { return store_; }
    std::size_t parameter_count() const { return store_.count(); }

    // Recorded forward pass. `teacher` (clean x0) is consumed only by
    // transformer-tf in training; everything else decodes from its own outputs.
    ag::Var forward(nn::ForwardContext& ctx, const Matrix& audio, const Matrix& x_t, int t,
                    std::optional<int> style, const Matrix* teacher = nullptr) const;

    // Inference (dropout off).
    Matrix predict(const Matrix& audio, const Matrix& x_t, int t, std::optional<int> style) const;

    // Noise encoder alone: N x D -> N x E. Rig kind has no encoder (ContractError).
    Matrix encode_noise(const Matrix& x_t) const;

    // Decoder alone on an already fused N x W matrix.
    Matrix decode_sequence(const Matrix& fused, std::optional<int> style) const;

    StyleCondition style_condition(int index) const;

private:
    struct NoiseEncoder;
    struct Core;

    ag::Var noise_latent(nn::ForwardContext& ctx, ag::Var x_t) const;
    ag::Var decode(nn::ForwardContext& ctx, ag::Var fused, std::optional<int> style,
                   const Matrix* teacher) const;
    std::optional<ag::Var> style_row(nn::ForwardContext& ctx, std::optional<int> style) const;

    DecoderConfig cfg_;
    ag::ParameterStore store_;
    std::unique_ptr<NoiseEncoder> noise_;
    std::unique_ptr<Core> core_;
    ag::Parameter* style_table_ = nullptr;
};

}  // namespace difface
