#pragma once

#include <random>
#include <string>
#include <vector>

#include "difface/errors.hpp"
#include "difface/seq_data.hpp"

namespace difface {

using Rng = std::mt19937_64;

// Linear-beta forward process. Index 0 holds the identity level
// (beta_0 = 0, alpha_bar_0 = 1); steps are 1..T.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    // Enforces 0 < beta_1 < ... < beta_T < 1.
    static NoiseSchedule from_betas(std::vector<double> betas);
    // No monotonicity check; only 0 <= beta < 1. Used for limit cases in tests.
    static NoiseSchedule from_betas_unchecked(std::vector<double> betas);

    int steps() const { return static_cast<int>(beta_.size()) - 1; }
    double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
    double alpha(int t) const { return 1.0 - beta(t); }
    double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }
    const std::vector<double>& betas() const { return beta_; }
    const std::vector<double>& alpha_bars() const { return alpha_bar_; }

private:
    std::vector<double> beta_;
    std::vector<double> alpha_bar_;
};

// beta_t linearly spaced from beta_start to beta_end inclusive. T == 1 yields beta_start.
NoiseSchedule build_linear_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02);

// Noised motion together with the Gaussian draw that produced it.
struct DiffusionSample {
    Matrix x_t;
    int t = 0;
    Matrix eps;
};

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// x_t = sqrt(1 - beta_t) x_prev + sqrt(beta_t) eps, t in [1, T].
DiffusionSample q_sample_step(const Matrix& x_prev, int t, const NoiseSchedule& sched, Rng& rng);

// x_t = sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps, t in [0, T] (t = 0 returns x_0).
DiffusionSample q_sample_closed_form(const Matrix& x0, int t, const NoiseSchedule& sched, Rng& rng);

enum class LossKind { kMse, kMae };

LossKind loss_kind_from_string(const std::string& s);

// Mean squared (or absolute) error over all elements.
double training_loss(const Matrix& x0, const Matrix& x_hat, LossKind kind = LossKind::kMse);

struct SampleStats {
    int evaluations = 0;
};

// Iterative predict-x0 sampler. `model(x_t, t)` returns the predicted clean
// N x D motion. Starts from standard normal noise at level T and walks
// t = T .. 1: predict x0, then re-noise the prediction to level t - 1 with the
// closed form. Stops after `steps` evaluations and returns the latest prediction.
template <class Denoiser>
Matrix sample_loop(Eigen::Index n_frames, Eigen::Index dims, const NoiseSchedule& sched,
                   Denoiser&& model, Rng& rng, int steps, SampleStats* stats = nullptr) {
    const int total = sched.steps();
    if (steps < 1 || steps > total) {
        throw ConfigError("sample steps must be in [1, " + std::to_string(total) + "], got " +
                          std::to_string(steps));
    }
    Matrix x = standard_normal(n_frames, dims, rng);
    Matrix x0_hat;
    for (int k = 0; k < steps; ++k) {
        const int t = total - k;
        x0_hat = model(static_cast<const Matrix&>(x), t);
        if (stats) ++stats->evaluations;
        if (x0_hat.rows() != n_frames || x0_hat.cols() != dims) {
            throw ContractError("denoiser returned " + std::to_string(x0_hat.rows()) + "x" +
                                std::to_string(x0_hat.cols()) + ", expected " +
                                std::to_string(n_frames) + "x" + std::to_string(dims));
        }
        if (!x0_hat.allFinite()) {
            throw NumericError("sampler diverged: non-finite prediction at t=" + std::to_string(t));
        }
        if (k + 1 == steps || t == 1) break;
        x = q_sample_closed_form(x0_hat, t - 1, sched, rng).x_t;
    }
    return x0_hat;
}

}  // namespace difface
