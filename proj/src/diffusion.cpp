#include "difface/diffusion.hpp"

#include <cmath>

namespace difface {

NoiseSchedule NoiseSchedule::from_betas_unchecked(std::vector<double> betas) {
    if (betas.empty()) throw ConfigError("noise schedule needs at least one step");
    NoiseSchedule s;
    s.beta_.reserve(betas.size() + 1);
    s.beta_.push_back(0.0);
    s.alpha_bar_.reserve(betas.size() + 1);
    s.alpha_bar_.push_back(1.0);
    for (double b : betas) {
        if (!(b >= 0.0 && b < 1.0)) {
            throw ConfigError("noise schedule beta must lie in [0, 1), got " + std::to_string(b));
        }
        s.beta_.push_back(b);
        s.alpha_bar_.push_back(s.alpha_bar_.back() * (1.0 - b));
    }
    return s;
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0 && betas[i] < 1.0)) {
            throw ConfigError("noise schedule beta_" + std::to_string(i + 1) +
                              " must lie in (0, 1)");
        }
        if (i > 0 && !(betas[i] > betas[i - 1])) {
            throw ConfigError("noise schedule betas must be strictly increasing");
        }
    }
    return from_betas_unchecked(std::move(betas));
}

NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("diffusion.steps must be >= 1");
    if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0)) {
        throw ConfigError("diffusion betas need 0 < beta_start < beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(steps));
    if (steps == 1) {
        betas[0] = beta_start;
    } else {
        for (int i = 0; i < steps; ++i) {
            betas[static_cast<std::size_t>(i)] =
                beta_start + (beta_end - beta_start) * static_cast<double>(i) / (steps - 1);
        }
        betas.back() = beta_end;  // exact endpoint, so a schedule rebuilt from its ends matches bit for bit
    }
    return NoiseSchedule::from_betas(std::move(betas));
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    // Fill row-major so draws follow frame order.
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    }
    return m;
}

DiffusionSample q_sample_step(const Matrix& x_prev, int t, const NoiseSchedule& sched, Rng& rng) {
    if (t < 1 || t > sched.steps()) {
        throw ContractError("diffusion step t=" + std::to_string(t) + " outside [1, " +
                            std::to_string(sched.steps()) + "]");
    }
    DiffusionSample s;
    s.t = t;
    s.eps = standard_normal(x_prev.rows(), x_prev.cols(), rng);
    const double b = sched.beta(t);
    s.x_t = std::sqrt(1.0 - b) * x_prev + std::sqrt(b) * s.eps;
    return s;
}

DiffusionSample q_sample_closed_form(const Matrix& x0, int t, const NoiseSchedule& sched, Rng& rng) {
    if (t < 0 || t > sched.steps()) {
        throw ContractError("diffusion level t=" + std::to_string(t) + " outside [0, " +
                            std::to_string(sched.steps()) + "]");
    }
    DiffusionSample s;
    s.t = t;
    if (t == 0) {
        s.x_t = x0;
        s.eps = Matrix::Zero(x0.rows(), x0.cols());
        return s;
    }
    s.eps = standard_normal(x0.rows(), x0.cols(), rng);
    const double ab = sched.alpha_bar(t);
    s.x_t = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * s.eps;
    return s;
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::kMse;
    if (s == "mae") return LossKind::kMae;
    throw ConfigError("unknown loss '" + s + "' (expected mse or mae)");
}

double training_loss(const Matrix& x0, const Matrix& x_hat, LossKind kind) {
    if (x0.rows() != x_hat.rows() || x0.cols() != x_hat.cols()) {
        throw ContractError("training_loss: shape mismatch");
    }
    if (x0.size() == 0) throw ContractError("training_loss: empty input");
    const auto diff = (x0 - x_hat).array();
    if (kind == LossKind::kMae) return diff.abs().mean();
    return diff.square().mean();
}

}  // namespace difface
