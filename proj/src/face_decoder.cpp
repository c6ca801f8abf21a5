#include "difface/face_decoder.hpp"

#include <random>

#include "difface/errors.hpp"

namespace difface {

using ag::Tape;
using ag::Var;
using nn::ForwardContext;

std::string to_string(DecoderVariant v) {
    switch (v) {
        case DecoderVariant::kGru:
            return "gru";
        case DecoderVariant::kRnn:
            return "rnn";
        case DecoderVariant::kTransformerTf:
            return "transformer-tf";
        case DecoderVariant::kTransformerAr:
            return "transformer-ar";
    }
    return "?";
}

std::string to_string(NoiseEncoderVariant v) {
    switch (v) {
        case NoiseEncoderVariant::kMlp:
            return "mlp";
        case NoiseEncoderVariant::kConvMax:
            return "conv-max";
        case NoiseEncoderVariant::kConvAvg:
            return "conv-avg";
        case NoiseEncoderVariant::kConvMaxX3:
            return "conv-max-x3";
        case NoiseEncoderVariant::kConvAvgX3:
            return "conv-avg-x3";
        case NoiseEncoderVariant::kNone:
            return "none";
    }
    return "?";
}

DecoderVariant decoder_variant_from_string(const std::string& s) {
    for (auto v : {DecoderVariant::kGru, DecoderVariant::kRnn, DecoderVariant::kTransformerTf,
                   DecoderVariant::kTransformerAr}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown decoder variant '" + s +
                      "' (expected gru, rnn, transformer-tf or transformer-ar)");
}

NoiseEncoderVariant noise_encoder_from_string(const std::string& s) {
    for (auto v : {NoiseEncoderVariant::kMlp, NoiseEncoderVariant::kConvMax,
                   NoiseEncoderVariant::kConvAvg, NoiseEncoderVariant::kConvMaxX3,
                   NoiseEncoderVariant::kConvAvgX3, NoiseEncoderVariant::kNone}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError("unknown noise encoder '" + s +
                      "' (expected mlp, conv-max, conv-avg, conv-max-x3, conv-avg-x3 or none)");
}

// ---------------------------------------------------------------------------
// DecoderConfig

void DecoderConfig::validate() const {
    if (kind != MotionKind::kVertex && kind != MotionKind::kRig) {
        throw ConfigError("decoder kind must be vertex or rig");
    }
    if (output_dim < 1) throw ConfigError("model output dimension must be >= 1");
    if (kind == MotionKind::kVertex && output_dim % 3 != 0) {
        throw ConfigError("vertex output dimension must be a multiple of 3");
    }
    if (audio_dim < 1) throw ConfigError("audio feature dimension must be >= 1");
    if (layers < 1) throw ConfigError("decoder needs at least one layer");
    if (hidden_size < 1) throw ConfigError("hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (t_emb_dim < 2) throw ConfigError("timestep embedding width must be >= 2");
    if (num_styles < 0) throw ConfigError("num_styles must be >= 0");
    if (kind == MotionKind::kVertex) {
        if (noise_encoder == NoiseEncoderVariant::kNone) {
            throw ConfigError("vertex data needs a noise encoder (model.noise_encoder != none)");
        }
        if (input_embedding_dim < 1) throw ConfigError("model.input_embedding_dim must be >= 1");
    } else if (noise_encoder != NoiseEncoderVariant::kNone) {
        throw ConfigError("rig data uses no noise encoder (set model.noise_encoder=none)");
    }
    if ((decoder == DecoderVariant::kTransformerTf || decoder == DecoderVariant::kTransformerAr) &&
        (heads < 1 || hidden_size % heads != 0)) {
        throw ConfigError("transformer hidden size must be divisible by model.heads");
    }
}

int DecoderConfig::noise_width() const {
    return kind == MotionKind::kVertex ? input_embedding_dim : output_dim;
}

int DecoderConfig::fused_width() const { return audio_dim + noise_width() + t_emb_dim; }

nlohmann::json DecoderConfig::to_json() const {
    return {{"kind", to_string(kind)},
            {"output_dim", output_dim},
            {"audio_dim", audio_dim},
            {"input_embedding_dim", input_embedding_dim},
            {"layers", layers},
            {"hidden_size", hidden_size},
            {"dropout", dropout},
            {"decoder", to_string(decoder)},
            {"noise_encoder", to_string(noise_encoder)},
            {"t_emb_dim", t_emb_dim},
            {"num_styles", num_styles},
            {"heads", heads},
            {"style_every_layer", style_every_layer}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
    DecoderConfig c;
    try {
        c.kind = motion_kind_from_string(j.at("kind").get<std::string>());
        c.output_dim = j.at("output_dim").get<int>();
        c.audio_dim = j.at("audio_dim").get<int>();
        c.input_embedding_dim = j.at("input_embedding_dim").get<int>();
        c.layers = j.at("layers").get<int>();
        c.hidden_size = j.at("hidden_size").get<int>();
        c.dropout = j.at("dropout").get<double>();
        c.decoder = decoder_variant_from_string(j.at("decoder").get<std::string>());
        c.noise_encoder = noise_encoder_from_string(j.at("noise_encoder").get<std::string>());
        c.t_emb_dim = j.at("t_emb_dim").get<int>();
        c.num_styles = j.at("num_styles").get<int>();
        c.heads = j.at("heads").get<int>();
        c.style_every_layer = j.at("style_every_layer").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed decoder config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Free functions

int StyleCondition::index() const {
    int found = -1;
    for (Eigen::Index i = 0; i < onehot.size(); ++i) {
        if (onehot(i) == 1.0) {
            if (found >= 0) throw ContractError("style one-hot has more than one active entry");
            found = static_cast<int>(i);
        } else if (onehot(i) != 0.0) {
            throw ContractError("style one-hot must be binary");
        }
    }
    if (found < 0) throw ContractError("style one-hot has no active entry");
    return found;
}

StyleCondition StyleCondition::select(int index, const Matrix& table) {
    if (index < 0 || index >= table.rows()) {
        throw ContractError("style id " + std::to_string(index) + " out of range [0, " +
                            std::to_string(table.rows()) + ")");
    }
    StyleCondition s;
    s.onehot = Eigen::VectorXd::Zero(table.rows());
    s.onehot(index) = 1.0;
    s.embedding_table = table;
    return s;
}

Matrix timestep_embedding(int t, int dim) { return nn::sinusoidal_row(static_cast<double>(t), dim); }

Matrix fuse_inputs(const Matrix& audio, const Matrix& noise_latent, const Matrix& t_emb) {
    if (audio.rows() != noise_latent.rows()) {
        throw ContractError("fuse_inputs: audio has " + std::to_string(audio.rows()) +
                            " frames, noise latent has " + std::to_string(noise_latent.rows()));
    }
    if (t_emb.rows() != 1) throw ContractError("fuse_inputs: timestep embedding must be one row");
    Matrix out(audio.rows(), audio.cols() + noise_latent.cols() + t_emb.cols());
    out << audio, noise_latent, t_emb.replicate(audio.rows(), 1);
    return out;
}

Matrix apply_style(const Matrix& hidden, const StyleCondition& style) {
    const int s = style.index();
    if (style.embedding_table.cols() != hidden.cols()) {
        throw ContractError("apply_style: hidden width " + std::to_string(hidden.cols()) +
                            " differs from style width " +
                            std::to_string(style.embedding_table.cols()));
    }
    if (s >= style.embedding_table.rows()) throw ContractError("apply_style: style row out of range");
    return hidden.array().rowwise() * style.embedding_table.row(s).array();
}

// ---------------------------------------------------------------------------
// FaceDecoder internals

struct FaceDecoder::NoiseEncoder {
    NoiseEncoderVariant variant;
    nn::Linear input;
    nn::Linear mlp_out;
    std::vector<nn::TemporalConv3> convs;

    NoiseEncoder(ag::ParameterStore& store, const DecoderConfig& cfg, std::mt19937_64& rng)
        : variant(cfg.noise_encoder) {
        const Eigen::Index e = cfg.input_embedding_dim;
        input = nn::Linear(store, "noise.input", cfg.output_dim, e, rng);
        int blocks = 0;
        switch (variant) {
            case NoiseEncoderVariant::kMlp:
                mlp_out = nn::Linear(store, "noise.mlp_out", e, e, rng);
                break;
            case NoiseEncoderVariant::kConvMax:
            case NoiseEncoderVariant::kConvAvg:
                blocks = 1;
                break;
            case NoiseEncoderVariant::kConvMaxX3:
            case NoiseEncoderVariant::kConvAvgX3:
                blocks = 3;
                break;
            case NoiseEncoderVariant::kNone:
                break;
        }
        for (int b = 0; b < blocks; ++b) {
            convs.emplace_back(store, "noise.conv" + std::to_string(b), e, 2 * e, rng);
        }
    }

    Var forward(ForwardContext& ctx, Var x) const {
        Var y = input.forward(ctx, x);
        if (variant == NoiseEncoderVariant::kMlp) {
            return mlp_out.forward(ctx, ag::leaky_relu(y, 0.01));
        }
        const bool use_max = variant == NoiseEncoderVariant::kConvMax ||
                             variant == NoiseEncoderVariant::kConvMaxX3;
        for (const auto& conv : convs) {
            const Var c = conv.forward(ctx, y);
            y = use_max ? ag::max_pool_cols(c, 2) : ag::avg_pool_cols(c, 2);
        }
        return y;
    }
};

struct FaceDecoder::Core {
    DecoderVariant variant;
    std::vector<std::unique_ptr<nn::RecurrentLayer>> recurrent;
    nn::Linear input;  // transformer: [fused | previous frame] -> H
    std::vector<nn::TransformerBlock> blocks;
    nn::Linear output;
};

FaceDecoder::FaceDecoder(DecoderConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    if (cfg_.kind == MotionKind::kVertex) noise_ = std::make_unique<NoiseEncoder>(store_, cfg_, rng);

    core_ = std::make_unique<Core>();
    core_->variant = cfg_.decoder;
    const Eigen::Index w = cfg_.fused_width();
    const Eigen::Index h = cfg_.hidden_size;
    switch (cfg_.decoder) {
        case DecoderVariant::kGru:
        case DecoderVariant::kRnn:
            for (int l = 0; l < cfg_.layers; ++l) {
                const std::string name = "decoder.layer" + std::to_string(l);
                const Eigen::Index in = l == 0 ? w : h;
                if (cfg_.decoder == DecoderVariant::kGru) {
                    core_->recurrent.push_back(std::make_unique<nn::GruLayer>(store_, name, in, h, rng));
                } else {
                    core_->recurrent.push_back(std::make_unique<nn::RnnLayer>(store_, name, in, h, rng));
                }
            }
            break;
        case DecoderVariant::kTransformerTf:
        case DecoderVariant::kTransformerAr:
            core_->input = nn::Linear(store_, "decoder.input", w + cfg_.output_dim, h, rng);
            for (int l = 0; l < cfg_.layers; ++l) {
                core_->blocks.emplace_back(store_, "decoder.block" + std::to_string(l), h,
                                           cfg_.heads, cfg_.dropout, rng);
            }
            break;
    }
    if (cfg_.num_styles > 0) {
        style_table_ = &store_.add("style.table",
                                   nn::fan_in_uniform(cfg_.num_styles, h, cfg_.num_styles, rng));
    }
    core_->output = nn::Linear(store_, "output", h, cfg_.output_dim, rng);
}

FaceDecoder::~FaceDecoder() = default;

std::optional<Var> FaceDecoder::style_row(ForwardContext& ctx, std::optional<int> style) const {
    if (!style) return std::nullopt;
    if (style_table_ == nullptr) throw ContractError("model was built without style conditioning");
    if (*style < 0 || *style >= cfg_.num_styles) {
        throw ContractError("style id " + std::to_string(*style) + " out of range [0, " +
                            std::to_string(cfg_.num_styles) + ")");
    }
    return ag::slice_rows(ctx.tape->param(*style_table_), *style, 1);
}

Var FaceDecoder::noise_latent(ForwardContext& ctx, Var x_t) const {
    if (!noise_) return x_t;
    return noise_->forward(ctx, x_t);
}

Var FaceDecoder::decode(ForwardContext& ctx, Var fused, std::optional<int> style,
                        const Matrix* teacher) const {
    Tape& t = *ctx.tape;
    const auto srow = style_row(ctx, style);
    auto modulate = [&](Var h) { return srow ? ag::mul_row(h, *srow) : h; };
    const Eigen::Index n = fused.rows();

    if (core_->variant == DecoderVariant::kGru || core_->variant == DecoderVariant::kRnn) {
        Var h = fused;
        for (std::size_t l = 0; l < core_->recurrent.size(); ++l) {
            h = core_->recurrent[l]->forward(ctx, h);
            if (!h.value().allFinite()) {
                throw NumericError("non-finite activations in decoder.layer" + std::to_string(l));
            }
            if (cfg_.style_every_layer) h = modulate(h);
            if (l + 1 < core_->recurrent.size()) h = nn::dropout(h, cfg_.dropout, ctx);
        }
        if (!cfg_.style_every_layer) h = modulate(h);
        return core_->output.forward(ctx, h);
    }

    const int hdim = cfg_.hidden_size;
    auto run_blocks_parallel = [&](Var h) {
        for (const auto& block : core_->blocks) {
            h = block.forward(ctx, h);
            if (cfg_.style_every_layer) h = modulate(h);
        }
        return cfg_.style_every_layer ? h : modulate(h);
    };

    if (core_->variant == DecoderVariant::kTransformerTf && teacher != nullptr) {
        if (teacher->rows() != n || teacher->cols() != cfg_.output_dim) {
            throw ContractError("teacher sequence shape does not match the decoder output");
        }
        Matrix pe(n, hdim);
        for (Eigen::Index i = 0; i < n; ++i) pe.row(i) = nn::sinusoidal_row(static_cast<double>(i), hdim);
        const Var prev = ag::shift_rows(t.constant(*teacher), 1);
        Var h = ag::add(core_->input.forward(ctx, ag::concat_cols({fused, prev})), t.constant(pe));
        return core_->output.forward(ctx, run_blocks_parallel(h));
    }

    // Autoregressive rollout over the model's own predictions.
    std::vector<nn::AttentionCache> caches(core_->blocks.size());
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(n));
    const Var zero_prev = t.constant(Matrix::Zero(1, cfg_.output_dim));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Var prev = i == 0 ? zero_prev : outs.back();
        Var h = ag::add(core_->input.forward(ctx, ag::concat_cols({ag::slice_rows(fused, i, 1), prev})),
                        t.constant(nn::sinusoidal_row(static_cast<double>(i), hdim)));
        for (std::size_t b = 0; b < core_->blocks.size(); ++b) {
            h = core_->blocks[b].step(ctx, h, caches[b]);
            if (cfg_.style_every_layer) h = modulate(h);
        }
        if (!cfg_.style_every_layer) h = modulate(h);
        outs.push_back(core_->output.forward(ctx, h));
    }
    return outs.size() == 1 ? outs.front() : ag::concat_rows(outs);
}

Var FaceDecoder::forward(ForwardContext& ctx, const Matrix& audio, const Matrix& x_t, int t,
                         std::optional<int> style, const Matrix* teacher) const {
    if (audio.rows() != x_t.rows()) {
        throw ContractError("audio has " + std::to_string(audio.rows()) + " frames, motion has " +
                            std::to_string(x_t.rows()));
    }
    if (audio.rows() < 1) throw ContractError("decoder input needs at least one frame");
    if (audio.cols() != cfg_.audio_dim) {
        throw ContractError("audio features have width " + std::to_string(audio.cols()) +
                            ", model expects " + std::to_string(cfg_.audio_dim));
    }
    if (x_t.cols() != cfg_.output_dim) {
        throw ContractError("noised motion has width " + std::to_string(x_t.cols()) +
                            ", model expects " + std::to_string(cfg_.output_dim));
    }
    Tape& tape = *ctx.tape;
    const Var latent = noise_latent(ctx, tape.constant(x_t));
    const Var temb = tape.constant(timestep_embedding(t, cfg_.t_emb_dim).replicate(audio.rows(), 1));
    const Var fused = ag::concat_cols({tape.constant(audio), latent, temb});
    const Var out = decode(ctx, fused, style, teacher);
    if (!out.value().allFinite()) {
        throw NumericError("decoder produced non-finite output (layer: output projection)");
    }
    return out;
}

Matrix FaceDecoder::predict(const Matrix& audio, const Matrix& x_t, int t,
                            std::optional<int> style) const {
    Tape tape(false);
    ForwardContext ctx{&tape, false, nullptr};
    return forward(ctx, audio, x_t, t, style).value();
}

Matrix FaceDecoder::encode_noise(const Matrix& x_t) const {
    if (!noise_) throw ContractError("rig-control models have no noise encoder (x_t passes through)");
    if (x_t.cols() != cfg_.output_dim) throw ContractError("encode_noise: width mismatch");
    Tape tape(false);
    ForwardContext ctx{&tape, false, nullptr};
    return noise_->forward(ctx, tape.constant(x_t)).value();
}

Matrix FaceDecoder::decode_sequence(const Matrix& fused, std::optional<int> style) const {
    if (fused.cols() != cfg_.fused_width()) {
        throw ContractError("decode_sequence: fused width " + std::to_string(fused.cols()) +
                            " differs from configured " + std::to_string(cfg_.fused_width()));
    }
    Tape tape(false);
    ForwardContext ctx{&tape, false, nullptr};
    const Matrix out = decode(ctx, tape.constant(fused), style, nullptr).value();
    if (!out.allFinite()) throw NumericError("decoder produced non-finite output (layer: output projection)");
    return out;
}

StyleCondition FaceDecoder::style_condition(int index) const {
    if (style_table_ == nullptr) throw ContractError("model was built without style conditioning");
    return StyleCondition::select(index, style_table_->value);
}

}  // namespace difface
