#include "difface/nn.hpp"

#include <cmath>

#include "difface/errors.hpp"

namespace difface::nn {

Var dropout(Var x, double p, ForwardContext& ctx) {
    if (!ctx.training || p <= 0.0) return x;
    if (ctx.rng == nullptr) throw ContractError("dropout in training mode needs an rng");
    std::bernoulli_distribution keep(1.0 - p);
    Matrix mask(x.rows(), x.cols());
    const double s = 1.0 / (1.0 - p);
    for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) mask(r, c) = keep(*ctx.rng) ? s : 0.0;
    }
    return ag::mul(x, ctx.tape->constant(std::move(mask)));
}

Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                      std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
    }
    return m;
}

// ---------------------------------------------------------------------------

Linear::Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
               std::mt19937_64& rng)
    : in_(in), out_(out) {
    weight_ = &store.add(name + ".weight", fan_in_uniform(in, out, in, rng));
    bias_ = &store.add(name + ".bias", fan_in_uniform(1, out, in, rng));
}

Var Linear::forward(ForwardContext& ctx, Var x) const {
    Tape& t = *ctx.tape;
    return ag::add_row(ag::matmul(x, t.param(*weight_)), t.param(*bias_));
}

TemporalConv3::TemporalConv3(ParameterStore& store, const std::string& name, Eigen::Index in,
                             Eigen::Index out, std::mt19937_64& rng)
    : taps_(store, name, 3 * in, out, rng) {}

Var TemporalConv3::forward(ForwardContext& ctx, Var x) const {
    // Columns: [x_{n-1} | x_n | x_{n+1}].
    return taps_.forward(ctx, ag::concat_cols({ag::shift_rows(x, 1), x, ag::shift_rows(x, -1)}));
}

// ---------------------------------------------------------------------------

GruLayer::GruLayer(ParameterStore& store, const std::string& name, Eigen::Index in,
                   Eigen::Index hidden, std::mt19937_64& rng)
    : hidden_(hidden) {
    w_ih_ = &store.add(name + ".w_ih", fan_in_uniform(in, 3 * hidden, hidden, rng));
    w_hh_ = &store.add(name + ".w_hh", fan_in_uniform(hidden, 3 * hidden, hidden, rng));
    b_ih_ = &store.add(name + ".b_ih", fan_in_uniform(1, 3 * hidden, hidden, rng));
    b_hh_ = &store.add(name + ".b_hh", fan_in_uniform(1, 3 * hidden, hidden, rng));
}

Var GruLayer::forward(ForwardContext& ctx, Var x) const {
    Tape& t = *ctx.tape;
    const Eigen::Index h = hidden_;
    const Var xp = ag::add_row(ag::matmul(x, t.param(*w_ih_)), t.param(*b_ih_));
    const Var w_hh = t.param(*w_hh_);
    const Var b_hh = t.param(*b_hh_);
    Var state = t.constant(Matrix::Zero(1, h));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        const Var xn = ag::slice_rows(xp, n, 1);
        const Var hp = ag::add_row(ag::matmul(state, w_hh), b_hh);
        const Var r = ag::sigmoid(ag::add(ag::slice_cols(xn, 0, h), ag::slice_cols(hp, 0, h)));
        const Var z = ag::sigmoid(ag::add(ag::slice_cols(xn, h, h), ag::slice_cols(hp, h, h)));
        const Var cand = ag::tanh(
            ag::add(ag::slice_cols(xn, 2 * h, h), ag::mul(r, ag::slice_cols(hp, 2 * h, h))));
        state = ag::add(ag::mul(ag::one_minus(z), cand), ag::mul(z, state));
        outs.push_back(state);
    }
    return ag::concat_rows(outs);
}

RnnLayer::RnnLayer(ParameterStore& store, const std::string& name, Eigen::Index in,
                   Eigen::Index hidden, std::mt19937_64& rng)
    : hidden_(hidden) {
    w_ih_ = &store.add(name + ".w_ih", fan_in_uniform(in, hidden, hidden, rng));
    w_hh_ = &store.add(name + ".w_hh", fan_in_uniform(hidden, hidden, hidden, rng));
    b_ih_ = &store.add(name + ".b_ih", fan_in_uniform(1, hidden, hidden, rng));
    b_hh_ = &store.add(name + ".b_hh", fan_in_uniform(1, hidden, hidden, rng));
}

Var RnnLayer::forward(ForwardContext& ctx, Var x) const {
    Tape& t = *ctx.tape;
    const Var xp = ag::add_row(ag::matmul(x, t.param(*w_ih_)), t.param(*b_ih_));
    const Var w_hh = t.param(*w_hh_);
    const Var b_hh = t.param(*b_hh_);
    Var state = t.constant(Matrix::Zero(1, hidden_));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        state = ag::tanh(
            ag::add(ag::slice_rows(xp, n, 1), ag::add_row(ag::matmul(state, w_hh), b_hh)));
        outs.push_back(state);
    }
    return ag::concat_rows(outs);
}

// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, Eigen::Index width) {
    gamma_ = &store.add(name + ".gamma", Matrix::Ones(1, width));
    beta_ = &store.add(name + ".beta", Matrix::Zero(1, width));
}

Var LayerNorm::forward(ForwardContext& ctx, Var x) const {
    return ag::layer_norm_rows(x, ctx.tape->param(*gamma_), ctx.tape->param(*beta_));
}

TransformerBlock::TransformerBlock(ParameterStore& store, const std::string& name,
                                   Eigen::Index width, int heads, double dropout,
                                   std::mt19937_64& rng)
    : q_(store, name + ".q", width, width, rng),
      k_(store, name + ".k", width, width, rng),
      v_(store, name + ".v", width, width, rng),
      o_(store, name + ".o", width, width, rng),
      ff1_(store, name + ".ff1", width, 2 * width, rng),
      ff2_(store, name + ".ff2", 2 * width, width, rng),
      norm1_(store, name + ".norm1", width),
      norm2_(store, name + ".norm2", width),
      heads_(heads),
      dropout_(dropout) {
    if (heads < 1 || width % heads != 0) {
        throw ConfigError("transformer width " + std::to_string(width) +
                          " is not divisible by heads " + std::to_string(heads));
    }
}

Var TransformerBlock::attend(ForwardContext& ctx, Var q, Var k, Var v, bool causal) const {
    const Eigen::Index dh = q.cols() / heads_;
    const double s = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index nq = q.rows(), nk = k.rows();
    std::optional<Var> mask;
    if (causal && nk > 1) {
        Matrix m = Matrix::Zero(nq, nk);
        for (Eigen::Index i = 0; i < nq; ++i) {
            for (Eigen::Index j = i + 1; j < nk; ++j) m(i, j) = -1e9;
        }
        mask = ctx.tape->constant(std::move(m));
    }
    std::vector<Var> parts;
    parts.reserve(static_cast<std::size_t>(heads_));
    for (int h = 0; h < heads_; ++h) {
        const Var qh = ag::slice_cols(q, h * dh, dh);
        const Var kh = ag::slice_cols(k, h * dh, dh);
        const Var vh = ag::slice_cols(v, h * dh, dh);
        Var scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), s);
        if (mask) scores = ag::add(scores, *mask);
        parts.push_back(ag::matmul(ag::softmax_rows(scores), vh));
    }
    return heads_ == 1 ? parts.front() : ag::concat_cols(parts);
}

Var TransformerBlock::finish(ForwardContext& ctx, Var x, Var attn) const {
    const Var a = norm1_.forward(ctx, ag::add(x, dropout(o_.forward(ctx, attn), dropout_, ctx)));
    const Var f = ff2_.forward(ctx, ag::relu(ff1_.forward(ctx, a)));
    return norm2_.forward(ctx, ag::add(a, dropout(f, dropout_, ctx)));
}

Var TransformerBlock::forward(ForwardContext& ctx, Var x) const {
    const Var attn = attend(ctx, q_.forward(ctx, x), k_.forward(ctx, x), v_.forward(ctx, x), true);
    return finish(ctx, x, attn);
}

Var TransformerBlock::step(ForwardContext& ctx, Var row, AttentionCache& cache) const {
    cache.keys.push_back(k_.forward(ctx, row));
    cache.values.push_back(v_.forward(ctx, row));
    const Var keys = cache.keys.size() == 1 ? cache.keys.front() : ag::concat_rows(cache.keys);
    const Var values = cache.values.size() == 1 ? cache.values.front() : ag::concat_rows(cache.values);
    const Var attn = attend(ctx, q_.forward(ctx, row), keys, values, false);
    return finish(ctx, row, attn);
}

Matrix sinusoidal_row(double position, int dim) {
    Matrix out = Matrix::Zero(1, dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / half);
        out(0, i) = std::sin(position * freq);
        out(0, half + i) = std::cos(position * freq);
    }
    return out;
}

}  // namespace difface::nn
