#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "difface/checkpoint.hpp"
#include "difface/diffusion.hpp"
#include "difface/face_decoder.hpp"

namespace difface {

struct TrainConfig {
    std::string optimizer = "adam";
    double learning_rate = 1e-4;
    int epochs = 50;
    // 1 = one sequence per step. Larger values group sequences of equal
    // length and average their losses before a single update.
    int batch_size = 1;
    std::uint64_t seed = 0;
    std::uint64_t val_seed = 0x5eed;
    std::string device = "cpu";
    LossKind loss = LossKind::kMse;
    bool diffusion_enabled = true;

    // learning_rate >= 0 is accepted so the zero-lr property can be exercised;
    // negative or non-finite rates, epochs < 1 and unknown optimizers are rejected.
    void validate() const;
};

// One training sequence: audio features aligned to the motion frame rate.
struct Example {
    std::string id;
    Matrix audio;   // N x F
    Matrix motion;  // N x D, clean x0
    std::optional<int> style;
};

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ag::ParameterStore& params);
    std::int64_t steps() const { return t_; }

    void save(Checkpoint& ckpt, const ag::ParameterStore& params) const;
    void load(const Checkpoint& ckpt, const ag::ParameterStore& params);

private:
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Matrix> m_, v_;
};

struct TrainState {
    int epoch = 0;  // last completed epoch
    std::int64_t step = 0;
    double last_loss = 0.0;
    double best_val = std::numeric_limits<double>::infinity();
    Rng rng;          // t and noise draws, epoch shuffles
    Rng dropout_rng;  // dropout masks

    std::string serialize_rngs() const;
    void restore_rngs(const std::string& s);
};

struct FitResult {
    std::vector<double> train_losses;  // epoch means, one per epoch run in this call
    std::vector<double> val_losses;
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    std::filesystem::path log;
};

// Architecture + diffusion description stored in checkpoints.
nlohmann::json model_config_json(const DecoderConfig& cfg, const NoiseSchedule& sched,
                                 bool diffusion_enabled);

class Trainer {
public:
    Trainer(FaceDecoder& model, const NoiseSchedule& sched, TrainConfig cfg);

    // One optimizer update on a single sequence; returns its loss.
    double train_step(const Example& ex);
    // One optimizer update on several sequences (mean loss).
    double train_batch(const std::vector<const Example*>& batch);

    // Mean loss over `subset` with dropout off. Each sequence's t and noise come
    // from an rng seeded by (val_seed, example id), so the value is reproducible
    // and equal to the mean of the per-sequence values.
    double evaluate_loss(const std::vector<Example>& subset) const;

    // Runs epochs state().epoch+1 .. cfg.epochs. Writes train_log.csv,
    // last.ckpt and best.ckpt into out_dir. `run_config` is embedded in the
    // checkpoints. When `resume` is set, model, optimizer and state are
    // restored from it first.
    FitResult fit(const std::vector<Example>& train, const std::vector<Example>& val,
                  const std::filesystem::path& out_dir, const nlohmann::json& run_config = {},
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

    Checkpoint make_checkpoint(const nlohmann::json& run_config) const;
    void restore(const Checkpoint& ckpt);

    // Called after every epoch with (epoch, train loss, val loss or NaN).
    void set_epoch_callback(std::function<void(int, double, double)> cb) { on_epoch_ = std::move(cb); }

    TrainState& state() { return state_; }
    const TrainState& state() const { return state_; }
    const TrainConfig& config() const { return cfg_; }

private:
    double accumulate_loss(const Example& ex, double weight);

    FaceDecoder& model_;
    const NoiseSchedule& sched_;
    TrainConfig cfg_;
    Adam adam_;
    TrainState state_;
    std::function<void(int, double, double)> on_epoch_;
};

// Full reverse process for one sequence. With diffusion disabled the model is
// evaluated once on x_t = 0 at level 0.
Matrix sample_sequence(const FaceDecoder& model, const Matrix& audio, std::optional<int> style,
                       const NoiseSchedule& sched, Rng& rng, int steps, bool diffusion_enabled,
                       SampleStats* stats = nullptr);

}  // namespace difface
