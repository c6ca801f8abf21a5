#pragma once

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace difface::ag {

using Matrix = Eigen::MatrixXd;

// Trainable tensor. Gradients accumulate across backward passes until zeroed.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Owns parameters with stable addresses (std::deque never relocates elements).
class ParameterStore {
public:
    Parameter& add(std::string name, Matrix value);
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    Parameter* find(const std::string& name);
    std::size_t count() const;  // total scalar count
    void zero_grad();

private:
    std::deque<Parameter> params_;
};

class Tape;

// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

// Reverse-mode recording of a single forward pass. Not thread-safe; one tape per pass.
class Tape {
public:
    // A tape built with grad disabled records no backward closures; parameters
    // then enter as read-only references (inference).
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Var constant(Matrix value);
    // Leaf that references p.value without copying; p must outlive the tape
    // and stay unmodified while it is in use.
    Var param(Parameter& p);
    Var param(const Parameter& p);

    const Matrix& value(Var v) const {
        const auto& n = nodes_[static_cast<std::size_t>(v.id)];
        return n.ref ? *n.ref : n.value;
    }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    // Seeds d(loss)/d(loss) = 1 for a 1x1 node and propagates into parameter grads.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // Internal: used by op implementations.
    using Backward = std::function<void(Tape&, const Matrix& grad)>;
    Var push(Matrix value, bool requires_grad, Backward back);
    void accumulate(int id, const Matrix& g);
    // Adds g into the (row, col) block of node id's gradient.
    void accumulate_block(int id, Eigen::Index row, Eigen::Index col, const Matrix& g);
    template <class Expr>
    void accumulate_expr(int id, const Expr& g) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

private:
    struct Node {
        Matrix value;
        const Matrix* ref = nullptr;
        Matrix grad;
        bool requires_grad = false;
        Backward back;
    };
    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

// ---- Elementwise and linear algebra ------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);         // elementwise
Var add_row(Var a, Var row);   // broadcast a 1 x C row to every row of a
Var mul_row(Var a, Var row);   // elementwise product with a broadcast 1 x C row
Var scale(Var a, double s);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var transpose(Var a);

// ---- Shape ------------------------------------------------------------------

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// out.row(n) = a.row(n - k), zero outside the range (k may be negative).
Var shift_rows(Var a, Eigen::Index k);
// Non-overlapping pooling along columns with window `width`.
Var max_pool_cols(Var a, Eigen::Index width);
Var avg_pool_cols(Var a, Eigen::Index width);

// ---- Normalisation / attention helpers ----------------------------------------

Var softmax_rows(Var a);
Var layer_norm_rows(Var a, Var gamma, Var beta, double eps = 1e-5);

// ---- Losses -----------------------------------------------------------------

Var mse(Var pred, Var target);
Var mae(Var pred, Var target);

}  // namespace difface::ag
