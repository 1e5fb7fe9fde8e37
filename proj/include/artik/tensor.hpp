#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "artik/common.hpp"

namespace artik {

using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Reverse-mode autodiff over dense f64 matrices.
//
// A Tape owns the computation graph; Value is a cheap handle into it. Nodes
// are recorded in construction order, which is already a topological order,
// so backward() is a single reverse sweep. One tape per training step, one
// thread per tape.
// ---------------------------------------------------------------------------

class Tape;

class Value {
public:
    Value() = default;
    Value(Tape* tape, std::int32_t index) : tape_(tape), index_(index) {}

    bool valid() const { return tape_ != nullptr; }
    std::int32_t index() const { return index_; }
    Tape* tape() const { return tape_; }

    const Matrix& data() const;
    const Matrix& grad() const;
    Eigen::Index rows() const { return data().rows(); }
    Eigen::Index cols() const { return data().cols(); }
    double scalar() const;

private:
    Tape* tape_ = nullptr;
    std::int32_t index_ = -1;
};

class Tape {
public:
    enum class Op : std::uint8_t {
        kLeaf,
        kMatmul,
        kAddBias,
        kAdd,
        kRelu,
        kConcat,
        kSin,
        kCos,
        kScale,
        kClamp,
        kBroadcastRow,
        kMeanAbs,
        kSumSq,
        kMean,
        kSoftmaxCrossEntropy,
    };

    struct Node {
        Matrix data;
        Matrix grad;
        Op op = Op::kLeaf;
        std::int32_t a = -1, b = -1;
        bool requires_grad = false;
        double c0 = 0.0, c1 = 0.0;       // op constants (scale factor, clamp bounds)
        Matrix aux;                      // op-specific (targets, cached softmax)
        std::vector<std::int32_t> classes;
    };

    Value leaf(Matrix m, bool requires_grad = true) {
        Node n;
        n.data = std::move(m);
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    Value scalar(double v) {
        Matrix m(1, 1);
        m(0, 0) = v;
        return leaf(std::move(m), false);
    }

    // x (n,k) * w (k,m) -> (n,m)
    Value matmul(Value x, Value w) {
        const Matrix& a = node(x).data;
        const Matrix& b = node(w).data;
        if (a.cols() != b.rows())
            throw ShapeError("matmul: " + shape_str(a) + " x " + shape_str(b));
        Node n;
        n.data.noalias() = a * b;
        n.op = Op::kMatmul;
        n.a = x.index();
        n.b = w.index();
        return push_with_grad(std::move(n));
    }

    // x (n,m) + bias (1,m) broadcast over rows
    Value add_bias(Value x, Value bias) {
        const Matrix& a = node(x).data;
        const Matrix& b = node(bias).data;
        if (b.rows() != 1 || b.cols() != a.cols())
            throw ShapeError("add_bias: " + shape_str(a) + " + " + shape_str(b));
        Node n;
        n.data = a.rowwise() + b.row(0);
        n.op = Op::kAddBias;
        n.a = x.index();
        n.b = bias.index();
        return push_with_grad(std::move(n));
    }

    Value add(Value x, Value y) {
        const Matrix& a = node(x).data;
        const Matrix& b = node(y).data;
        if (a.rows() != b.rows() || a.cols() != b.cols())
            throw ShapeError("add: " + shape_str(a) + " + " + shape_str(b));
        Node n;
        n.data = a + b;
        n.op = Op::kAdd;
        n.a = x.index();
        n.b = y.index();
        return push_with_grad(std::move(n));
    }

    Value relu(Value x) {
        Node n;
        n.data = node(x).data.cwiseMax(0.0);
        n.op = Op::kRelu;
        n.a = x.index();
        return push_with_grad(std::move(n));
    }

    // Column-wise concatenation: (n,p) ++ (n,q) -> (n,p+q)
    Value concat(Value x, Value y) {
        const Matrix& a = node(x).data;
        const Matrix& b = node(y).data;
        if (a.rows() != b.rows())
            throw ShapeError("concat: " + shape_str(a) + " ++ " + shape_str(b));
        Node n;
        n.data.resize(a.rows(), a.cols() + b.cols());
        n.data.leftCols(a.cols()) = a;
        n.data.rightCols(b.cols()) = b;
        n.op = Op::kConcat;
        n.a = x.index();
        n.b = y.index();
        return push_with_grad(std::move(n));
    }

    Value sin(Value x) {
        Node n;
        n.data = node(x).data.array().sin();
        n.op = Op::kSin;
        n.a = x.index();
        return push_with_grad(std::move(n));
    }

    Value cos(Value x) {
        Node n;
        n.data = node(x).data.array().cos();
        n.op = Op::kCos;
        n.a = x.index();
        return push_with_grad(std::move(n));
    }

    Value scale(Value x, double factor) {
        Node n;
        n.data = node(x).data * factor;
        n.op = Op::kScale;
        n.a = x.index();
        n.c0 = factor;
        return push_with_grad(std::move(n));
    }

    // Elementwise clamp to [lo, hi]; gradient passes strictly inside.
    Value clamp(Value x, double lo, double hi) {
        Node n;
        n.data = node(x).data.cwiseMax(lo).cwiseMin(hi);
        n.op = Op::kClamp;
        n.a = x.index();
        n.c0 = lo;
        n.c1 = hi;
        return push_with_grad(std::move(n));
    }

    // Repeat a (1,m) row n times -> (n,m). Used to share a latent code or a
    // pose embedding across a batch.
    Value broadcast_row(Value x, Eigen::Index n_rows) {
        const Matrix& a = node(x).data;
        if (a.rows() != 1) throw ShapeError("broadcast_row: input must be a row, got " + shape_str(a));
        Node n;
        n.data = a.replicate(n_rows, 1);
        n.op = Op::kBroadcastRow;
        n.a = x.index();
        return push_with_grad(std::move(n));
    }

    // mean(|x - target|) over all entries -> scalar. target carries no grad.
    Value mean_abs(Value x, Matrix target) {
        const Matrix& a = node(x).data;
        if (a.rows() != target.rows() || a.cols() != target.cols())
            throw ShapeError("mean_abs: " + shape_str(a) + " vs " + shape_str(target));
        Node n;
        n.data = Matrix::Constant(1, 1, (a - target).cwiseAbs().mean());
        n.op = Op::kMeanAbs;
        n.a = x.index();
        n.aux = std::move(target);
        return push_with_grad(std::move(n));
    }

    Value sum_sq(Value x) {
        Node n;
        n.data = Matrix::Constant(1, 1, node(x).data.squaredNorm());
        n.op = Op::kSumSq;
        n.a = x.index();
        return push_with_grad(std::move(n));
    }

    Value mean(Value x) {
        Node n;
        n.data = Matrix::Constant(1, 1, node(x).data.mean());
        n.op = Op::kMean;
        n.a = x.index();
        return push_with_grad(std::move(n));
    }

    // Mean softmax cross-entropy of logits (n,C) against integer classes.
    Value softmax_cross_entropy(Value logits, std::vector<std::int32_t> classes) {
        const Matrix& z = node(logits).data;
        if (static_cast<Eigen::Index>(classes.size()) != z.rows())
            throw ShapeError("softmax_cross_entropy: " + std::to_string(classes.size()) +
                             " classes vs logits " + shape_str(z));
        Node n;
        Matrix soft(z.rows(), z.cols());
        double total = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const std::int32_t c = classes[static_cast<std::size_t>(i)];
            if (c < 0 || c >= z.cols())
                throw ShapeError("softmax_cross_entropy: class " + std::to_string(c) +
                                 " outside logits " + shape_str(z));
            const double m = z.row(i).maxCoeff();
            Eigen::ArrayXd e = (z.row(i).array() - m).exp();
            const double s = e.sum();
            soft.row(i) = (e / s).matrix();
            total += -(z(i, c) - m - std::log(s));
        }
        n.data = Matrix::Constant(1, 1, total / static_cast<double>(z.rows()));
        n.op = Op::kSoftmaxCrossEntropy;
        n.a = logits.index();
        n.aux = std::move(soft);
        n.classes = std::move(classes);
        return push_with_grad(std::move(n));
    }

    // Reverse sweep from a scalar root. Each leaf with requires_grad gets
    // grad = d root / d leaf. Calling twice without a fresh tape is a bug we
    // surface instead of silently accumulating.
    void backward(Value root) {
        Node& r = node(root);
        if (r.data.rows() != 1 || r.data.cols() != 1)
            throw ContractError("backward: root must be scalar, got " + shape_str(r.data));
        if (backward_done_)
            throw ContractError("backward: called twice on the same tape");
        backward_done_ = true;

        for (auto& n : nodes_)
            if (n.requires_grad) n.grad.setZero(n.data.rows(), n.data.cols());
        if (!r.requires_grad) return;  // root disconnected from any parameter
        r.grad(0, 0) = 1.0;

        for (std::int32_t i = root.index(); i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.requires_grad || n.op == Op::kLeaf) continue;
            if (n.grad.size() == 0) continue;
            apply_backward(n);
        }
    }

    const Node& node(Value v) const { return nodes_.at(static_cast<std::size_t>(v.index())); }
    Node& node(Value v) { return nodes_.at(static_cast<std::size_t>(v.index())); }
    std::size_t size() const { return nodes_.size(); }

private:
    friend class Value;

    static std::string shape_str(const Matrix& m) {
        return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
    }

    Value push(Node n) {
        nodes_.push_back(std::move(n));
        return Value(this, static_cast<std::int32_t>(nodes_.size() - 1));
    }

    Value push_with_grad(Node n) {
        n.requires_grad = (n.a >= 0 && nodes_[static_cast<std::size_t>(n.a)].requires_grad) ||
                          (n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].requires_grad);
        return push(std::move(n));
    }

    Matrix* grad_of(std::int32_t idx) {
        if (idx < 0) return nullptr;
        Node& n = nodes_[static_cast<std::size_t>(idx)];
        return n.requires_grad ? &n.grad : nullptr;
    }

    void apply_backward(Node& n) {
        const Matrix& g = n.grad;
        Matrix* ga = grad_of(n.a);
        Matrix* gb = grad_of(n.b);
        const Matrix& a = n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].data : n.data;
        const Matrix& b = n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].data : n.data;

        switch (n.op) {
            case Op::kLeaf:
                break;
            case Op::kMatmul:
                if (ga) ga->noalias() += g * b.transpose();
                if (gb) gb->noalias() += a.transpose() * g;
                break;
            case Op::kAddBias:
                if (ga) *ga += g;
                if (gb) gb->row(0) += g.colwise().sum();
                break;
            case Op::kAdd:
                if (ga) *ga += g;
                if (gb) *gb += g;
                break;
            case Op::kRelu:
                if (ga) *ga += (a.array() > 0.0).cast<double>().matrix().cwiseProduct(g);
                break;
            case Op::kConcat:
                if (ga) *ga += g.leftCols(a.cols());
                if (gb) *gb += g.rightCols(b.cols());
                break;
            case Op::kSin:
                if (ga) *ga += a.array().cos().matrix().cwiseProduct(g);
                break;
            case Op::kCos:
                if (ga) *ga -= a.array().sin().matrix().cwiseProduct(g);
                break;
            case Op::kScale:
                if (ga) *ga += g * n.c0;
                break;
            case Op::kClamp:
                if (ga)
                    *ga += ((a.array() > n.c0) && (a.array() < n.c1)).cast<double>().matrix().cwiseProduct(g);
                break;
            case Op::kBroadcastRow:
                if (ga) ga->row(0) += g.colwise().sum();
                break;
            case Op::kMeanAbs: {
                if (ga) {
                    const double s = g(0, 0) / static_cast<double>(a.size());
                    *ga += ((a - n.aux).array().sign() * s).matrix();
                }
                break;
            }
            case Op::kSumSq:
                if (ga) *ga += 2.0 * g(0, 0) * a;
                break;
            case Op::kMean:
                if (ga) ga->array() += g(0, 0) / static_cast<double>(a.size());
                break;
            case Op::kSoftmaxCrossEntropy: {
                if (ga) {
                    const double s = g(0, 0) / static_cast<double>(a.rows());
                    Matrix d = n.aux;
                    for (Eigen::Index i = 0; i < d.rows(); ++i)
                        d(i, n.classes[static_cast<std::size_t>(i)]) -= 1.0;
                    *ga += d * s;
                }
                break;
            }
        }
    }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

inline const Matrix& Value::data() const { return tape_->node(*this).data; }
inline const Matrix& Value::grad() const { return tape_->node(*this).grad; }
inline double Value::scalar() const {
    const Matrix& m = data();
    if (m.rows() != 1 || m.cols() != 1) throw ContractError("Value::scalar on non-scalar");
    return m(0, 0);
}

// ---------------------------------------------------------------------------
// Adam with standard bias correction. One state per parameter list; the
// parameter order must stay fixed across steps.
// ---------------------------------------------------------------------------

struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

inline void adam_step(std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                      AdamState& state) {
    if (params.size() != grads.size())
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].setZero(params[i]->rows(), params[i]->cols());
            state.v[i].setZero(params[i]->rows(), params[i]->cols());
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i]->allFinite())
            throw TrainingDivergedError("adam_step: non-finite gradient in parameter " + std::to_string(i),
                                        "");
        if (grads[i]->rows() != params[i]->rows() || grads[i]->cols() != params[i]->cols())
            throw ShapeError("adam_step: parameter/gradient shape mismatch at " + std::to_string(i));
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        const Matrix& g = *grads[i];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        const Matrix m_hat = m / bc1;
        const Matrix v_hat = v / bc2;
        *params[i] -= state.learning_rate *
                      m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Matrix::Constant(v.rows(), v.cols(), state.epsilon));
    }
}

}  // namespace artik
