#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <set>

#include "difface/errors.hpp"
#include "difface/face_decoder.hpp"
#include "test_util.hpp"

namespace difface {
namespace {

const DecoderVariant kAllDecoders[] = {DecoderVariant::kGru, DecoderVariant::kRnn,
                                       DecoderVariant::kTransformerTf, DecoderVariant::kTransformerAr};
const NoiseEncoderVariant kAllNoiseEncoders[] = {
    NoiseEncoderVariant::kMlp, NoiseEncoderVariant::kConvMax, NoiseEncoderVariant::kConvAvg,
    NoiseEncoderVariant::kConvMaxX3, NoiseEncoderVariant::kConvAvgX3};

DecoderConfig tiny_rig(DecoderVariant v, int d = 4, int styles = 0) {
    DecoderConfig c;
    c.kind = MotionKind::kRig;
    c.output_dim = d;
    c.audio_dim = 6;
    c.layers = 2;
    c.hidden_size = 8;
    c.dropout = 0.0;
    c.decoder = v;
    c.noise_encoder = NoiseEncoderVariant::kNone;
    c.t_emb_dim = 8;
    c.heads = 2;
    c.num_styles = styles;
    return c;
}

DecoderConfig tiny_vertex(NoiseEncoderVariant ne, int d = 6, int e = 4) {
    DecoderConfig c = tiny_rig(DecoderVariant::kGru, d);
    c.kind = MotionKind::kVertex;
    c.noise_encoder = ne;
    c.input_embedding_dim = e;
    return c;
}

// ---- Fusion and style -----------------------------------------------------------------

TEST(FuseInputs, WidthIsSumOfParts) {
    const Matrix out = fuse_inputs(Matrix::Zero(7, 32), Matrix::Zero(7, 16), Matrix::Zero(1, 8));
    EXPECT_EQ(out.cols(), 56);
    EXPECT_EQ(out.rows(), 7);
    EXPECT_THROW(fuse_inputs(Matrix::Zero(7, 32), Matrix::Zero(6, 16), Matrix::Zero(1, 8)),
                 ContractError);
}

TEST(FuseInputs, FramePermutationCommutes) {
    std::mt19937_64 rng(1);
    const Matrix audio = testing::random_matrix(5, 3, rng);
    const Matrix latent = testing::random_matrix(5, 2, rng);
    const Matrix temb = timestep_embedding(17, 4);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    const Matrix a = perm * fuse_inputs(audio, latent, temb);
    const Matrix b = fuse_inputs(perm * audio, perm * latent, temb);
    EXPECT_EQ(a, b);
}

TEST(FuseInputs, ZeroInputsGiveBroadcastTimestepRows) {
    const Matrix temb = timestep_embedding(42, 8);
    const Matrix out = fuse_inputs(Matrix::Zero(4, 3), Matrix::Zero(4, 5), temb);
    for (Eigen::Index n = 0; n < 4; ++n) {
        EXPECT_TRUE(out.row(n).head(8).isZero(0.0));
        EXPECT_EQ(out.row(n).tail(8), temb.row(0));
    }
}

TEST(ApplyStyle, HandCases) {
    Matrix table(2, 2);
    table << 0.5, 2.0, 1.0, 1.0;
    Matrix hidden(1, 2);
    hidden << 2.0, 3.0;
    EXPECT_EQ(apply_style(hidden, StyleCondition::select(0, table)), (Matrix(1, 2) << 1.0, 6.0).finished());
    EXPECT_EQ(apply_style(hidden, StyleCondition::select(1, table)), hidden);
    const Matrix zero_table = Matrix::Zero(3, 2);
    EXPECT_TRUE(apply_style(hidden, StyleCondition::select(2, zero_table)).isZero(0.0));
    EXPECT_THROW(apply_style(Matrix::Zero(1, 3), StyleCondition::select(0, table)), ContractError);
    EXPECT_THROW(StyleCondition::select(2, table), ContractError);
    StyleCondition two_hot = StyleCondition::select(0, table);
    two_hot.onehot(1) = 1.0;
    EXPECT_THROW(two_hot.index(), ContractError);
}

TEST(TimestepEmbedding, DistinctBelowThousand) {
    std::set<std::vector<double>> seen;
    for (int t = 0; t < 1000; ++t) {
        const Matrix e = timestep_embedding(t, 128);
        EXPECT_EQ(e, timestep_embedding(t, 128));
        seen.insert(std::vector<double>(e.data(), e.data() + e.size()));
    }
    EXPECT_EQ(seen.size(), 1000u);
}

// ---- Variants -----------------------------------------------------------------------

TEST(FaceDecoder, GruHasMoreParametersThanRnn) {
    for (int hidden : {4, 8, 32}) {
        auto cg = tiny_rig(DecoderVariant::kGru);
        cg.hidden_size = hidden;
        auto cr = cg;
        cr.decoder = DecoderVariant::kRnn;
        const FaceDecoder gru(cg, 1), rnn(cr, 1);
        // Analytic counts: recurrent layers differ by their gate multiplicity,
        // the output layer (H*D + D) is shared.
        const long long h = hidden, w = cg.fused_width(), d = cg.output_dim;
        auto layer = [&](long long in, long long gates) { return gates * (in * h + h * h + 2 * h); };
        const long long gru_expected = layer(w, 3) + layer(h, 3) + h * d + d;
        const long long rnn_expected = layer(w, 1) + layer(h, 1) + h * d + d;
        EXPECT_EQ(static_cast<long long>(gru.parameter_count()), gru_expected);
        EXPECT_EQ(static_cast<long long>(rnn.parameter_count()), rnn_expected);
        EXPECT_GT(gru.parameter_count(), rnn.parameter_count());
    }
}

TEST(FaceDecoder, EveryVariantMapsToOutputShape) {
    std::mt19937_64 rng(2);
    for (auto v : kAllDecoders) {
        const FaceDecoder model(tiny_rig(v, 4, 2), 3);
        for (Eigen::Index n : {1, 2, 5}) {
            const Matrix audio = testing::random_matrix(n, 6, rng);
            const Matrix x_t = testing::random_matrix(n, 4, rng);
            for (std::optional<int> style : {std::optional<int>(), std::optional<int>(1)}) {
                const Matrix out = model.predict(audio, x_t, 7, style);
                EXPECT_EQ(out.rows(), n) << to_string(v);
                EXPECT_EQ(out.cols(), 4) << to_string(v);
                EXPECT_TRUE(out.allFinite());
            }
        }
    }
    for (auto ne : kAllNoiseEncoders) {
        const FaceDecoder model(tiny_vertex(ne), 3);
        const Matrix out = model.predict(testing::random_matrix(5, 6, rng), testing::random_matrix(5, 6, rng),
                                         3, std::nullopt);
        EXPECT_EQ(out.rows(), 5) << to_string(ne);
        EXPECT_EQ(out.cols(), 6) << to_string(ne);
    }
}

TEST(FaceDecoder, DecodeSequenceMatchesPredictOnFusedInput) {
    std::mt19937_64 rng(4);
    for (auto v : kAllDecoders) {
        const FaceDecoder model(tiny_rig(v, 4, 2), 5);
        const Matrix audio = testing::random_matrix(3, 6, rng);
        const Matrix x_t = testing::random_matrix(3, 4, rng);
        const Matrix fused = fuse_inputs(audio, x_t, timestep_embedding(9, 8));
        EXPECT_EQ(model.decode_sequence(fused, 0), model.predict(audio, x_t, 9, 0)) << to_string(v);
        EXPECT_THROW(model.decode_sequence(Matrix::Zero(3, 5), 0), ContractError);
    }
}

TEST(FaceDecoder, PresetLatentWidths) {
    // BIWI: 70110 vertices would be too large for a unit test; the encoder
    // contract only depends on E, so a small mesh with E=512 is used.
    auto biwi = tiny_vertex(NoiseEncoderVariant::kConvMax, 30, 512);
    const FaceDecoder b(biwi, 1);
    EXPECT_EQ(b.encode_noise(Matrix::Zero(3, 30)).cols(), 512);
    auto multiface = tiny_vertex(NoiseEncoderVariant::kConvMax, 30, 256);
    const FaceDecoder m(multiface, 1);
    std::mt19937_64 rng(5);
    for (Eigen::Index n : {1, 4, 11}) {
        const Matrix z = m.encode_noise(testing::random_matrix(n, 30, rng));
        EXPECT_EQ(z.rows(), n);
        EXPECT_EQ(z.cols(), 256);
    }
}

TEST(FaceDecoder, ZeroInitializedEncoderGivesZeroLatent) {
    for (auto ne : kAllNoiseEncoders) {
        FaceDecoder model(tiny_vertex(ne), 1);
        for (auto* p : model.parameters().all()) {
            if (p->name.rfind("noise.", 0) == 0) p->value.setZero();
        }
        EXPECT_TRUE(model.encode_noise(Matrix::Zero(4, 6)).isZero(0.0)) << to_string(ne);
    }
}

TEST(FaceDecoder, RigHasNoNoiseEncoder) {
    const FaceDecoder model(tiny_rig(DecoderVariant::kGru), 1);
    EXPECT_THROW(model.encode_noise(Matrix::Zero(2, 4)), ContractError);
}

TEST(FaceDecoder, BitStableAcrossCalls) {
    std::mt19937_64 rng(6);
    for (auto v : kAllDecoders) {
        const FaceDecoder a(tiny_rig(v, 4, 2), 11), b(tiny_rig(v, 4, 2), 11);
        const Matrix audio = testing::random_matrix(5, 6, rng);
        const Matrix x_t = testing::random_matrix(5, 4, rng);
        EXPECT_EQ(a.predict(audio, x_t, 3, 1), a.predict(audio, x_t, 3, 1));
        EXPECT_EQ(a.predict(audio, x_t, 3, 1), b.predict(audio, x_t, 3, 1));
    }
}

TEST(FaceDecoder, DistinctStylesGiveDistinctOutputs) {
    std::mt19937_64 rng(7);
    for (auto v : kAllDecoders) {
        auto cfg = tiny_rig(v, 4, 3);
        for (bool every : {false, true}) {
            cfg.style_every_layer = every;
            const FaceDecoder model(cfg, 13);
            const Matrix audio = testing::random_matrix(4, 6, rng);
            const Matrix x_t = testing::random_matrix(4, 4, rng);
            EXPECT_NE(model.predict(audio, x_t, 5, 0), model.predict(audio, x_t, 5, 1)) << to_string(v);
            EXPECT_NE(model.predict(audio, x_t, 5, 1), model.predict(audio, x_t, 5, 2)) << to_string(v);
        }
        const FaceDecoder model(cfg, 13);
        EXPECT_THROW(model.predict(Matrix::Zero(2, 6), Matrix::Zero(2, 4), 1, 3), ContractError);
    }
}

TEST(FaceDecoder, TeacherForcingOnlyAffectsTrainingPass) {
    std::mt19937_64 rng(8);
    const FaceDecoder model(tiny_rig(DecoderVariant::kTransformerTf), 2);
    const Matrix audio = testing::random_matrix(4, 6, rng);
    const Matrix x_t = testing::random_matrix(4, 4, rng);
    const Matrix teacher = testing::random_matrix(4, 4, rng);
    ag::Tape tape(false);
    nn::ForwardContext ctx{&tape, true, &rng};
    const Matrix forced = model.forward(ctx, audio, x_t, 2, std::nullopt, &teacher).value();
    const Matrix free = model.predict(audio, x_t, 2, std::nullopt);
    EXPECT_NE(forced, free);
    // First frame sees a zero previous frame either way.
    EXPECT_LT((forced.row(0) - free.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FaceDecoder, NonFiniteActivationNamesLayer) {
    FaceDecoder model(tiny_rig(DecoderVariant::kGru), 1);
    model.parameters().find("decoder.layer1.w_hh")->value(0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        model.predict(Matrix::Ones(3, 6), Matrix::Ones(3, 4), 1, std::nullopt);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("decoder.layer1"), std::string::npos) << e.what();
    }
}

TEST(DecoderConfig, ValidationAndNames) {
    EXPECT_THROW(decoder_variant_from_string("lstm"), ConfigError);
    EXPECT_THROW(noise_encoder_from_string("conv"), ConfigError);
    auto bad = tiny_vertex(NoiseEncoderVariant::kNone);
    EXPECT_THROW(FaceDecoder(bad, 1), ConfigError);
    auto rig_with_encoder = tiny_rig(DecoderVariant::kGru);
    rig_with_encoder.noise_encoder = NoiseEncoderVariant::kMlp;
    EXPECT_THROW(FaceDecoder(rig_with_encoder, 1), ConfigError);
    auto dropout = tiny_rig(DecoderVariant::kGru);
    dropout.dropout = 1.0;
    EXPECT_THROW(dropout.validate(), ConfigError);
    for (auto v : kAllDecoders) EXPECT_EQ(decoder_variant_from_string(to_string(v)), v);
    for (auto v : kAllNoiseEncoders) EXPECT_EQ(noise_encoder_from_string(to_string(v)), v);
    const auto cfg = tiny_vertex(NoiseEncoderVariant::kConvAvgX3);
    const auto back = DecoderConfig::from_json(cfg.to_json());
    EXPECT_EQ(back.to_json(), cfg.to_json());
}

}  // namespace
}  // namespace difface
