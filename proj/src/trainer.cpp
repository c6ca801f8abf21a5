#include "difface/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "difface/errors.hpp"
#include "difface/motion_io.hpp"

namespace difface {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (optimizer != "adam") {
        throw ConfigError("unsupported optimizer '" + optimizer + "' (only adam is implemented)");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train.learning_rate must be a finite non-negative number");
    }
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (device != "cpu") throw ConfigError("train.device '" + device + "' unavailable (cpu only)");
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(ag::ParameterStore& params) {
    auto all = params.all();
    if (m_.empty()) {
        for (const auto* p : all) {
            m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (m_.size() != all.size()) throw ContractError("optimizer state does not match the parameters");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto* p = all[i];
        if (p->grad.size() == 0) continue;  // never touched by backward
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p->grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
        p->value.array() -=
            lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

void Adam::save(Checkpoint& ckpt, const ag::ParameterStore& params) const {
    ckpt.has_optimizer = true;
    ckpt.optimizer_step = t_;
    const auto all = params.all();
    for (std::size_t i = 0; i < all.size(); ++i) {
        const Matrix zero = Matrix::Zero(all[i]->value.rows(), all[i]->value.cols());
        ckpt.tensors.emplace_back("adam.m." + all[i]->name, m_.empty() ? zero : m_[i]);
        ckpt.tensors.emplace_back("adam.v." + all[i]->name, v_.empty() ? zero : v_[i]);
    }
}

void Adam::load(const Checkpoint& ckpt, const ag::ParameterStore& params) {
    m_.clear();
    v_.clear();
    t_ = 0;
    if (!ckpt.has_optimizer) return;
    t_ = ckpt.optimizer_step;
    for (const auto* p : params.all()) {
        const Matrix* m = ckpt.find("adam.m." + p->name);
        const Matrix* v = ckpt.find("adam.v." + p->name);
        if (m == nullptr || v == nullptr) {
            throw DataError("checkpoint lacks optimizer state for '" + p->name + "'");
        }
        m_.push_back(*m);
        v_.push_back(*v);
    }
}

// ---------------------------------------------------------------------------
// TrainState

std::string TrainState::serialize_rngs() const {
    std::ostringstream out;
    out << rng << '|' << dropout_rng;
    return out.str();
}

void TrainState::restore_rngs(const std::string& s) {
    const auto bar = s.find('|');
    if (bar == std::string::npos) throw DataError("malformed rng state in checkpoint");
    std::istringstream a(s.substr(0, bar)), b(s.substr(bar + 1));
    a >> rng;
    b >> dropout_rng;
    if (!a || !b) throw DataError("malformed rng state in checkpoint");
}

// ---------------------------------------------------------------------------

nlohmann::json model_config_json(const DecoderConfig& cfg, const NoiseSchedule& sched,
                                 bool diffusion_enabled) {
    const int T = sched.steps();
    return {{"model", cfg.to_json()},
            {"diffusion",
             {{"steps", T},
              {"beta_start", T >= 1 ? sched.beta(1) : 0.0},
              {"beta_end", T >= 1 ? sched.beta(T) : 0.0},
              {"enabled", diffusion_enabled}}}};
}

namespace {

std::uint64_t id_seed(std::uint64_t base, const std::string& id) {
    std::uint64_t h = 1469598103934665603ULL ^ base;
    for (unsigned char c : id) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

ag::Var loss_var(ag::Var pred, ag::Var target, LossKind kind) {
    return kind == LossKind::kMae ? ag::mae(pred, target) : ag::mse(pred, target);
}

void check_example(const Example& ex, const DecoderConfig& cfg) {
    if (ex.motion.cols() != cfg.output_dim) {
        throw DataError("sequence '" + ex.id + "' has " + std::to_string(ex.motion.cols()) +
                        " motion dims, model expects " + std::to_string(cfg.output_dim));
    }
    if (ex.audio.rows() != ex.motion.rows()) {
        throw DataError("sequence '" + ex.id + "' audio/motion frame counts differ");
    }
}

}  // namespace

Trainer::Trainer(FaceDecoder& model, const NoiseSchedule& sched, TrainConfig cfg)
    : model_(model), sched_(sched), cfg_(std::move(cfg)), adam_(cfg_.learning_rate) {
    cfg_.validate();
    if (sched_.steps() < 1) throw ConfigError("diffusion schedule has no steps");
    std::seed_seq seq{cfg_.seed, std::uint64_t{0x7a11}};
    std::array<std::uint64_t, 2> seeds{};
    seq.generate(seeds.begin(), seeds.end());
    state_.rng.seed(seeds[0]);
    state_.dropout_rng.seed(seeds[1]);
}

double Trainer::accumulate_loss(const Example& ex, double weight) {
    check_example(ex, model_.config());
    int t = 0;
    Matrix x_t;
    if (cfg_.diffusion_enabled) {
        std::uniform_int_distribution<int> pick(1, sched_.steps());
        t = pick(state_.rng);
        x_t = q_sample_closed_form(ex.motion, t, sched_, state_.rng).x_t;
    } else {
        x_t = Matrix::Zero(ex.motion.rows(), ex.motion.cols());
    }
    ag::Tape tape;
    nn::ForwardContext ctx{&tape, true, &state_.dropout_rng};
    const ag::Var pred = model_.forward(ctx, ex.audio, x_t, t, ex.style, &ex.motion);
    const ag::Var loss = loss_var(pred, tape.constant(ex.motion), cfg_.loss);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss on '" + ex.id + "' at step " +
                           std::to_string(state_.step) + " (t=" + std::to_string(t) + ")");
    }
    tape.backward(weight == 1.0 ? loss : ag::scale(loss, weight));
    return value;
}

double Trainer::train_step(const Example& ex) { return train_batch({&ex}); }

double Trainer::train_batch(const std::vector<const Example*>& batch) {
    if (batch.empty()) throw ContractError("empty training batch");
    model_.parameters().zero_grad();
    const double w = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const Example* ex : batch) total += accumulate_loss(*ex, w);
    for (const auto* p : model_.parameters().all()) {
        if (!p->grad.allFinite()) {
            throw NumericError("non-finite gradient for '" + p->name + "' at step " +
                               std::to_string(state_.step));
        }
    }
    adam_.step(model_.parameters());
    ++state_.step;
    state_.last_loss = total * w;
    return state_.last_loss;
}

double Trainer::evaluate_loss(const std::vector<Example>& subset) const {
    if (subset.empty()) throw ContractError("evaluate_loss on an empty subset");
    double total = 0.0;
    for (const Example& ex : subset) {
        check_example(ex, model_.config());
        Rng rng(id_seed(cfg_.val_seed, ex.id));
        int t = 0;
        Matrix x_t;
        if (cfg_.diffusion_enabled) {
            std::uniform_int_distribution<int> pick(1, sched_.steps());
            t = pick(rng);
            x_t = q_sample_closed_form(ex.motion, t, sched_, rng).x_t;
        } else {
            x_t = Matrix::Zero(ex.motion.rows(), ex.motion.cols());
        }
        ag::Tape tape(false);
        nn::ForwardContext ctx{&tape, false, nullptr};
        const ag::Var pred = model_.forward(ctx, ex.audio, x_t, t, ex.style, &ex.motion);
        total += training_loss(ex.motion, pred.value(), cfg_.loss);
    }
    return total / static_cast<double>(subset.size());
}

Checkpoint Trainer::make_checkpoint(const nlohmann::json& run_config) const {
    Checkpoint c;
    c.config = model_config_json(model_.config(), sched_, cfg_.diffusion_enabled);
    c.config["run"] = run_config.is_null() ? nlohmann::json::object() : run_config;
    c.config_hash = config_hash(c.config);
    c.epoch = state_.epoch;
    c.step = state_.step;
    c.best_val = state_.best_val;
    c.rng_state = state_.serialize_rngs();
    store_parameters(model_, c);
    adam_.save(c, model_.parameters());
    return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
    const auto expected =
        config_hash(model_config_json(model_.config(), sched_, cfg_.diffusion_enabled));
    load_parameters(model_, ckpt, expected);
    adam_.load(ckpt, model_.parameters());
    state_.epoch = ckpt.epoch;
    state_.step = ckpt.step;
    state_.best_val = ckpt.best_val;
    state_.restore_rngs(ckpt.rng_state);
}

FitResult Trainer::fit(const std::vector<Example>& train, const std::vector<Example>& val,
                       const fs::path& out_dir, const nlohmann::json& run_config,
                       const std::optional<fs::path>& resume) {
    if (train.empty()) throw ConfigError("training split is empty");
    fs::create_directories(out_dir);
    if (resume) restore(load_checkpoint(*resume));

    FitResult result;
    result.log = out_dir / "train_log.csv";
    result.last_checkpoint = out_dir / "last.ckpt";
    result.best_checkpoint = out_dir / "best.ckpt";

    const bool append = resume.has_value() && fs::exists(result.log);
    std::ofstream log(result.log, append ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot write training log '" + result.log.string() + "'");
    if (!append) log << "epoch,step,train_loss,val_loss,wall_seconds\n";

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train.size());
    for (int epoch = state_.epoch + 1; epoch <= cfg_.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), state_.rng);

        std::vector<std::vector<const Example*>> batches;
        if (cfg_.batch_size == 1) {
            for (auto i : order) batches.push_back({&train[i]});
        } else {
            // Length buckets keep every batch rectangular.
            std::map<Eigen::Index, std::vector<const Example*>> buckets;
            for (auto i : order) buckets[train[i].motion.rows()].push_back(&train[i]);
            for (auto& [len, items] : buckets) {
                for (std::size_t k = 0; k < items.size(); k += static_cast<std::size_t>(cfg_.batch_size)) {
                    const auto end = std::min(items.size(), k + static_cast<std::size_t>(cfg_.batch_size));
                    batches.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(k),
                                         items.begin() + static_cast<std::ptrdiff_t>(end));
                }
            }
            std::shuffle(batches.begin(), batches.end(), state_.rng);
        }

        double sum = 0.0;
        try {
            for (const auto& b : batches) sum += train_batch(b);
        } catch (const NumericError&) {
            // Keep the diverged state around for inspection.
            save_checkpoint(out_dir / "diverged.ckpt", make_checkpoint(run_config));
            throw;
        }
        const double train_loss = sum / static_cast<double>(batches.size());
        const double val_loss = val.empty() ? std::nan("") : evaluate_loss(val);
        const double score = val.empty() ? train_loss : val_loss;
        state_.epoch = epoch;
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << epoch << ',' << state_.step << ',' << format_double(train_loss) << ','
            << (val.empty() ? std::string() : format_double(val_loss)) << ','
            << format_double(wall) << '\n';
        log.flush();
        result.train_losses.push_back(train_loss);
        result.val_losses.push_back(val_loss);
        if (on_epoch_) on_epoch_(epoch, train_loss, val_loss);

        const bool improved = score < state_.best_val;
        if (improved) state_.best_val = score;
        const Checkpoint ckpt = make_checkpoint(run_config);
        save_checkpoint(result.last_checkpoint, ckpt);
        if (improved || !fs::exists(result.best_checkpoint)) {
            save_checkpoint(result.best_checkpoint, ckpt);
        }
    }
    return result;
}

Matrix sample_sequence(const FaceDecoder& model, const Matrix& audio, std::optional<int> style,
                       const NoiseSchedule& sched, Rng& rng, int steps, bool diffusion_enabled,
                       SampleStats* stats) {
    const Eigen::Index n = audio.rows();
    const Eigen::Index d = model.config().output_dim;
    if (!diffusion_enabled) {
        Matrix out = model.predict(audio, Matrix::Zero(n, d), 0, style);
        if (stats) ++stats->evaluations;
        return out;
    }
    return sample_loop(
        n, d, sched,
        [&](const Matrix& x_t, int t) { return model.predict(audio, x_t, t, style); }, rng, steps,
        stats);
}

}  // namespace difface
