#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "difface/autograd.hpp"

namespace difface::nn {

using ag::Matrix;
using ag::Parameter;
using ag::ParameterStore;
using ag::Tape;
using ag::Var;

// Per-pass settings shared by all layers.
struct ForwardContext {
    Tape* tape = nullptr;
    bool training = false;
    std::mt19937_64* rng = nullptr;  // dropout masks; required when training with dropout > 0
};

// Inverted dropout. Identity outside training or when p == 0.
Var dropout(Var x, double p, ForwardContext& ctx);

// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                      std::mt19937_64& rng);

// Row-vector affine map: x (N x in) -> x W + b (N x out).
class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
           std::mt19937_64& rng);
    Var forward(ForwardContext& ctx, Var x) const;
    Eigen::Index in() const { return in_; }
    Eigen::Index out() const { return out_; }

private:
    Parameter* weight_ = nullptr;
    Parameter* bias_ = nullptr;
    Eigen::Index in_ = 0;
    Eigen::Index out_ = 0;
};

// Temporal convolution, kernel 3, zero "same" padding: N x C_in -> N x C_out.
class TemporalConv3 {
public:
    TemporalConv3() = default;
    TemporalConv3(ParameterStore& store, const std::string& name, Eigen::Index in,
                  Eigen::Index out, std::mt19937_64& rng);
    Var forward(ForwardContext& ctx, Var x) const;

private:
    Linear taps_;
};

// Single recurrent layer over a whole sequence, zero initial state.
class RecurrentLayer {
public:
    virtual ~RecurrentLayer() = default;
    virtual Var forward(ForwardContext& ctx, Var x) const = 0;
};

// r = s(x Wr + h Ur), z = s(x Wz + h Uz), n = tanh(x Wn + bn + r * (h Un + cn)),
// h' = (1 - z) * n + z * h   (gate layout r|z|n, PyTorch convention).
class GruLayer final : public RecurrentLayer {
public:
    GruLayer(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
             std::mt19937_64& rng);
    Var forward(ForwardContext& ctx, Var x) const override;

private:
    Parameter* w_ih_;
    Parameter* w_hh_;
    Parameter* b_ih_;
    Parameter* b_hh_;
    Eigen::Index hidden_;
};

// h' = tanh(x W + b + h U + c).
class RnnLayer final : public RecurrentLayer {
public:
    RnnLayer(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
             std::mt19937_64& rng);
    Var forward(ForwardContext& ctx, Var x) const override;

private:
    Parameter* w_ih_;
    Parameter* w_hh_;
    Parameter* b_ih_;
    Parameter* b_hh_;
    Eigen::Index hidden_;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index width);
    Var forward(ForwardContext& ctx, Var x) const;

private:
    Parameter* gamma_ = nullptr;
    Parameter* beta_ = nullptr;
};

// Key/value rows seen so far by one block during incremental decoding.
struct AttentionCache {
    std::vector<Var> keys;
    std::vector<Var> values;
};

// Post-norm causal self-attention block with a 2x-wide ReLU feed-forward.
class TransformerBlock {
public:
    TransformerBlock(ParameterStore& store, const std::string& name, Eigen::Index width, int heads,
                     double dropout, std::mt19937_64& rng);

    // All rows at once under a causal mask.
    Var forward(ForwardContext& ctx, Var x) const;
    // One new row attending to the cached rows plus itself.
    Var step(ForwardContext& ctx, Var row, AttentionCache& cache) const;

private:
    Var attend(ForwardContext& ctx, Var q, Var k, Var v, bool causal) const;
    Var finish(ForwardContext& ctx, Var x, Var attn) const;

    Linear q_, k_, v_, o_, ff1_, ff2_;
    LayerNorm norm1_, norm2_;
    int heads_;
    double dropout_;
};

// Sinusoidal encoding: [sin(p w_0) .. sin(p w_{k-1}) | cos(p w_0) .. cos(p w_{k-1})],
// w_i = 10000^(-i / k), k = dim / 2 (an odd dim gets a trailing zero column).
Matrix sinusoidal_row(double position, int dim);

}  // namespace difface::nn
