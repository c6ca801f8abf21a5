#include "difface/autograd.hpp"

#include <cmath>

#include "difface/errors.hpp"

namespace difface::ag {

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(std::string name, Matrix value) {
    for (const auto& p : params_) {
        if (p.name == name) throw ContractError("duplicate parameter name '" + name + "'");
    }
    Parameter& p = params_.emplace_back();
    p.name = std::move(name);
    p.value = std::move(value);
    p.zero_grad();
    return p;
}

std::vector<Parameter*> ParameterStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(&p);
    return out;
}

Parameter* ParameterStore::find(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

std::size_t ParameterStore::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::push(Matrix value, bool requires_grad, Backward back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
    if (!grad_enabled_) return param(static_cast<const Parameter&>(p));
    Parameter* ptr = &p;
    Var v = push(Matrix(), true, [ptr](Tape&, const Matrix& g) {
        if (ptr->grad.rows() != g.rows() || ptr->grad.cols() != g.cols()) {
            ptr->grad = g;
        } else {
            ptr->grad += g;
        }
    });
    nodes_.back().ref = &p.value;
    return v;
}

Var Tape::param(const Parameter& p) {
    if (grad_enabled_) throw ContractError("read-only parameter used on a gradient tape");
    Var v = push(Matrix(), false, nullptr);
    nodes_.back().ref = &p.value;
    return v;
}

void Tape::accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::accumulate_block(int id, Eigen::Index row, Eigen::Index col, const Matrix& g) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
        const Matrix& v = n.ref ? *n.ref : n.value;
        n.grad = Matrix::Zero(v.rows(), v.cols());
    }
    n.grad.block(row, col, g.rows(), g.cols()) += g;
}

void Tape::backward(Var loss) {
    auto& root = nodes_[static_cast<std::size_t>(loss.id)];
    if (value(loss).size() != 1) throw ContractError("backward needs a scalar (1x1) loss");
    if (!root.requires_grad) return;
    root.grad = Matrix::Ones(1, 1);
    for (int id = loss.id; id >= 0; --id) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.grad.size() == 0 || !n.back) continue;
        n.back(*this, n.grad);
    }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ContractError("autograd: operands live on different tapes");
}

void require_same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ContractError(std::string("autograd ") + op + ": shape mismatch " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

template <class F>
Var unary(Var a, Matrix value, F&& grad_fn) {
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.push(std::move(value), t.requires_grad(a),
                  [ia, grad_fn = std::forward<F>(grad_fn)](Tape& tp, const Matrix& g) {
                      tp.accumulate(ia, grad_fn(tp, g));
                  });
}

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    if (a.cols() != b.rows()) {
        throw ContractError("autograd matmul: inner dimensions " + std::to_string(a.cols()) +
                            " and " + std::to_string(b.rows()) + " differ");
    }
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.push(a.value() * b.value(), t.requires_grad(a) || t.requires_grad(b),
                  [ia, ib](Tape& tp, const Matrix& g) {
                      const Matrix& av = tp.value(Var{&tp, ia});
                      const Matrix& bv = tp.value(Var{&tp, ib});
                      if (tp.requires_grad(Var{&tp, ia})) tp.accumulate_expr(ia, g * bv.transpose());
                      if (tp.requires_grad(Var{&tp, ib})) tp.accumulate_expr(ib, av.transpose() * g);
                  });
}

Var add(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "add");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.push(a.value() + b.value(), t.requires_grad(a) || t.requires_grad(b),
                  [ia, ib](Tape& tp, const Matrix& g) {
                      tp.accumulate(ia, g);
                      tp.accumulate(ib, g);
                  });
}

Var sub(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "sub");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.push(a.value() - b.value(), t.requires_grad(a) || t.requires_grad(b),
                  [ia, ib](Tape& tp, const Matrix& g) {
                      tp.accumulate(ia, g);
                      tp.accumulate_expr(ib, -g);
                  });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "mul");
    Tape& t = *a.tape;
    const int ia = a.id, ib = b.id;
    return t.push(a.value().cwiseProduct(b.value()), t.requires_grad(a) || t.requires_grad(b),
                  [ia, ib](Tape& tp, const Matrix& g) {
                      const Matrix& av = tp.value(Var{&tp, ia});
                      const Matrix& bv = tp.value(Var{&tp, ib});
                      tp.accumulate_expr(ia, g.cwiseProduct(bv));
                      tp.accumulate_expr(ib, g.cwiseProduct(av));
                  });
}

Var add_row(Var a, Var row) {
    require_same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ContractError("autograd add_row: row must be 1 x " + std::to_string(a.cols()));
    }
    Tape& t = *a.tape;
    const int ia = a.id, ir = row.id;
    Matrix v = a.value();
    v.rowwise() += row.value().row(0);
    return t.push(std::move(v), t.requires_grad(a) || t.requires_grad(row),
                  [ia, ir](Tape& tp, const Matrix& g) {
                      tp.accumulate(ia, g);
                      tp.accumulate_expr(ir, g.colwise().sum());
                  });
}

Var mul_row(Var a, Var row) {
    require_same_tape(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ContractError("autograd mul_row: row must be 1 x " + std::to_string(a.cols()));
    }
    Tape& t = *a.tape;
    const int ia = a.id, ir = row.id;
    Matrix v = a.value().array().rowwise() * row.value().row(0).array();
    return t.push(std::move(v), t.requires_grad(a) || t.requires_grad(row),
                  [ia, ir](Tape& tp, const Matrix& g) {
                      const Matrix& av = tp.value(Var{&tp, ia});
                      const Matrix& rv = tp.value(Var{&tp, ir});
                      if (tp.requires_grad(Var{&tp, ia})) {
                          tp.accumulate_expr(ia, (g.array().rowwise() * rv.row(0).array()).matrix());
                      }
                      if (tp.requires_grad(Var{&tp, ir})) {
                          tp.accumulate_expr(ir, g.cwiseProduct(av).colwise().sum());
                      }
                  });
}

Var scale(Var a, double s) {
    return unary(a, a.value() * s, [s](Tape&, const Matrix& g) -> Matrix { return g * s; });
}

Var one_minus(Var a) {
    Matrix v = (1.0 - a.value().array()).matrix();
    return unary(a, std::move(v), [](Tape&, const Matrix& g) -> Matrix { return -g; });
}

Var sigmoid(Var a) {
    Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    Tape& t = *a.tape;
    const int ia = a.id;
    const int io = static_cast<int>(t.size());  // id the output node will get
    return t.push(std::move(v), t.requires_grad(a), [ia, io](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value(Var{&tp, io});
        tp.accumulate_expr(ia, (g.array() * y.array() * (1.0 - y.array())).matrix());
    });
}

Var tanh(Var a) {
    Matrix v = a.value().array().tanh().matrix();
    Tape& t = *a.tape;
    const int ia = a.id;
    const int io = static_cast<int>(t.size());
    return t.push(std::move(v), t.requires_grad(a), [ia, io](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value(Var{&tp, io});
        tp.accumulate_expr(ia, (g.array() * (1.0 - y.array().square())).matrix());
    });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
    Matrix v = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
    return unary(a, std::move(v), [ia = a.id, slope](Tape& tp, const Matrix& g) -> Matrix {
        const Matrix& x = tp.value(Var{&tp, ia});
        return g.binaryExpr(x, [slope](double gv, double xv) { return xv > 0.0 ? gv : slope * gv; });
    });
}

Var transpose(Var a) {
    return unary(a, a.value().transpose(),
                 [](Tape&, const Matrix& g) -> Matrix { return g.transpose(); });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("autograd concat_cols: no parts");
    Tape& t = *parts.front().tape;
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    bool rg = false;
    for (const auto& p : parts) {
        require_same_tape(parts.front(), p);
        if (p.rows() != rows) throw ContractError("autograd concat_cols: row counts differ");
        cols += p.cols();
        rg = rg || t.requires_grad(p);
    }
    Matrix v(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> layout;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p.cols()) = p.value();
        layout.emplace_back(p.id, p.cols());
        at += p.cols();
    }
    return t.push(std::move(v), rg, [layout](Tape& tp, const Matrix& g) {
        Eigen::Index off = 0;
        for (const auto& [id, c] : layout) {
            if (tp.requires_grad(Var{&tp, id})) tp.accumulate_expr(id, g.middleCols(off, c));
            off += c;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("autograd concat_rows: no parts");
    Tape& t = *parts.front().tape;
    const Eigen::Index cols = parts.front().cols();
    Eigen::Index rows = 0;
    bool rg = false;
    for (const auto& p : parts) {
        require_same_tape(parts.front(), p);
        if (p.cols() != cols) throw ContractError("autograd concat_rows: column counts differ");
        rows += p.rows();
        rg = rg || t.requires_grad(p);
    }
    Matrix v(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> layout;
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p.rows()) = p.value();
        layout.emplace_back(p.id, p.rows());
        at += p.rows();
    }
    return t.push(std::move(v), rg, [layout](Tape& tp, const Matrix& g) {
        Eigen::Index off = 0;
        for (const auto& [id, r] : layout) {
            if (tp.requires_grad(Var{&tp, id})) tp.accumulate_expr(id, g.middleRows(off, r));
            off += r;
        }
    });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw ContractError("autograd slice_rows: range out of bounds");
    }
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.push(a.value().middleRows(start, count), t.requires_grad(a),
                  [ia, start](Tape& tp, const Matrix& g) { tp.accumulate_block(ia, start, 0, g); });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        throw ContractError("autograd slice_cols: range out of bounds");
    }
    Tape& t = *a.tape;
    const int ia = a.id;
    return t.push(a.value().middleCols(start, count), t.requires_grad(a),
                  [ia, start](Tape& tp, const Matrix& g) { tp.accumulate_block(ia, 0, start, g); });
}

Var shift_rows(Var a, Eigen::Index k) {
    const Eigen::Index n = a.rows();
    Matrix v = Matrix::Zero(n, a.cols());
    const Eigen::Index len = n - std::abs(k);
    if (len > 0) {
        if (k >= 0) {
            v.bottomRows(len) = a.value().topRows(len);
        } else {
            v.topRows(len) = a.value().bottomRows(len);
        }
    }
    return unary(a, std::move(v), [k, n](Tape&, const Matrix& g) -> Matrix {
        Matrix back = Matrix::Zero(n, g.cols());
        const Eigen::Index l = n - std::abs(k);
        if (l > 0) {
            if (k >= 0) {
                back.topRows(l) = g.bottomRows(l);
            } else {
                back.bottomRows(l) = g.topRows(l);
            }
        }
        return back;
    });
}

Var max_pool_cols(Var a, Eigen::Index width) {
    if (width < 1 || a.cols() % width != 0) {
        throw ContractError("autograd max_pool_cols: width must divide the column count");
    }
    const Eigen::Index rows = a.rows(), out_cols = a.cols() / width;
    Matrix v(rows, out_cols);
    std::vector<Eigen::Index> arg(static_cast<std::size_t>(rows * out_cols));
    const Matrix& x = a.value();
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < out_cols; ++c) {
            Eigen::Index best = c * width;
            for (Eigen::Index k = 1; k < width; ++k) {
                if (x(r, c * width + k) > x(r, best)) best = c * width + k;
            }
            v(r, c) = x(r, best);
            arg[static_cast<std::size_t>(r * out_cols + c)] = best;
        }
    }
    const Eigen::Index in_cols = a.cols();
    return unary(a, std::move(v),
                 [arg = std::move(arg), rows, out_cols, in_cols](Tape&, const Matrix& g) -> Matrix {
                     Matrix back = Matrix::Zero(rows, in_cols);
                     for (Eigen::Index r = 0; r < rows; ++r) {
                         for (Eigen::Index c = 0; c < out_cols; ++c) {
                             back(r, arg[static_cast<std::size_t>(r * out_cols + c)]) += g(r, c);
                         }
                     }
                     return back;
                 });
}

Var avg_pool_cols(Var a, Eigen::Index width) {
    if (width < 1 || a.cols() % width != 0) {
        throw ContractError("autograd avg_pool_cols: width must divide the column count");
    }
    const Eigen::Index rows = a.rows(), out_cols = a.cols() / width;
    Matrix v = Matrix::Zero(rows, out_cols);
    for (Eigen::Index c = 0; c < out_cols; ++c) {
        v.col(c) = a.value().middleCols(c * width, width).rowwise().mean();
    }
    return unary(a, std::move(v), [width, out_cols](Tape&, const Matrix& g) -> Matrix {
        Matrix back(g.rows(), out_cols * width);
        for (Eigen::Index c = 0; c < out_cols; ++c) {
            for (Eigen::Index k = 0; k < width; ++k) back.col(c * width + k) = g.col(c) / width;
        }
        return back;
    });
}

Var softmax_rows(Var a) {
    Matrix v = a.value();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double m = v.row(r).maxCoeff();
        v.row(r) = (v.row(r).array() - m).exp();
        v.row(r) /= v.row(r).sum();
    }
    Tape& t = *a.tape;
    const int ia = a.id;
    const int io = static_cast<int>(t.size());
    return t.push(std::move(v), t.requires_grad(a), [ia, io](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value(Var{&tp, io});
        const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
        Matrix back = y.cwiseProduct(g);
        back -= y.cwiseProduct(dot.replicate(1, y.cols()));
        tp.accumulate(ia, back);
    });
}

Var layer_norm_rows(Var a, Var gamma, Var beta, double eps) {
    require_same_tape(a, gamma);
    require_same_tape(a, beta);
    const Eigen::Index cols = a.cols();
    if (gamma.rows() != 1 || gamma.cols() != cols || beta.rows() != 1 || beta.cols() != cols) {
        throw ContractError("autograd layer_norm_rows: gamma/beta must be 1 x C");
    }
    const Matrix& x = a.value();
    Matrix xhat(x.rows(), cols);
    Eigen::VectorXd inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
    }
    Matrix y = xhat.array().rowwise() * gamma.value().row(0).array();
    y.rowwise() += beta.value().row(0);
    Tape& t = *a.tape;
    const int ia = a.id, ig = gamma.id, ib = beta.id;
    return t.push(std::move(y), t.requires_grad(a) || t.requires_grad(gamma) || t.requires_grad(beta),
                  [ia, ig, ib, xhat, inv_std](Tape& tp, const Matrix& g) {
                      const Matrix& gam = tp.value(Var{&tp, ig});
                      tp.accumulate_expr(ib, g.colwise().sum());
                      tp.accumulate_expr(ig, g.cwiseProduct(xhat).colwise().sum());
                      if (!tp.requires_grad(Var{&tp, ia})) return;
                      const Matrix dxhat = g.array().rowwise() * gam.row(0).array();
                      const double c = static_cast<double>(g.cols());
                      Matrix dx(g.rows(), g.cols());
                      for (Eigen::Index r = 0; r < g.rows(); ++r) {
                          const double s1 = dxhat.row(r).sum();
                          const double s2 = dxhat.row(r).dot(xhat.row(r));
                          dx.row(r) = (inv_std(r) / c) *
                                      (c * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
                      }
                      tp.accumulate(ia, dx);
                  });
}

Var mse(Var pred, Var target) {
    require_same_tape(pred, target);
    require_same_shape(pred, target, "mse");
    const Matrix diff = pred.value() - target.value();
    const double n = static_cast<double>(diff.size());
    Matrix v(1, 1);
    v(0, 0) = diff.squaredNorm() / n;
    Tape& t = *pred.tape;
    const int ip = pred.id, it = target.id;
    return t.push(std::move(v), t.requires_grad(pred) || t.requires_grad(target),
                  [ip, it, diff, n](Tape& tp, const Matrix& g) {
                      const double s = 2.0 * g(0, 0) / n;
                      tp.accumulate_expr(ip, diff * s);
                      tp.accumulate_expr(it, diff * -s);
                  });
}

Var mae(Var pred, Var target) {
    require_same_tape(pred, target);
    require_same_shape(pred, target, "mae");
    const Matrix diff = pred.value() - target.value();
    const double n = static_cast<double>(diff.size());
    Matrix v(1, 1);
    v(0, 0) = diff.cwiseAbs().sum() / n;
    Tape& t = *pred.tape;
    const int ip = pred.id, it = target.id;
    return t.push(std::move(v), t.requires_grad(pred) || t.requires_grad(target),
                  [ip, it, diff, n](Tape& tp, const Matrix& g) {
                      const Matrix sgn = diff.unaryExpr([](double d) {
                          return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                      });
                      tp.accumulate_expr(ip, sgn * (g(0, 0) / n));
                      tp.accumulate_expr(it, sgn * (-g(0, 0) / n));
                  });
}

}  // namespace difface::ag
