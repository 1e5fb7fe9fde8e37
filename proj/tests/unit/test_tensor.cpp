#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "artik/rng.hpp"
#include "artik/tensor.hpp"

using namespace artik;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-scale, scale);
    return m;
}

// Central finite differences of a scalar function with respect to one input
// matrix, compared entrywise against the tape gradient.
void check_gradient(const std::function<double(const std::vector<Matrix>&)>& f,
                    std::vector<Matrix> inputs, const std::vector<Matrix>& analytic, double h = 1e-5,
                    double tol = 1e-6) {
    for (std::size_t p = 0; p < inputs.size(); ++p) {
        for (Eigen::Index i = 0; i < inputs[p].rows(); ++i) {
            for (Eigen::Index j = 0; j < inputs[p].cols(); ++j) {
                const double keep = inputs[p](i, j);
                inputs[p](i, j) = keep + h;
                const double fp = f(inputs);
                inputs[p](i, j) = keep - h;
                const double fm = f(inputs);
                inputs[p](i, j) = keep;
                const double fd = (fp - fm) / (2.0 * h);
                const double ad = analytic[p](i, j);
                REQUIRE(ad == Catch::Approx(fd).margin(tol).epsilon(1e-5));
            }
        }
    }
}

}  // namespace

TEST_CASE("forward ops: documented examples") {
    Tape tape;
    Matrix x(1, 2);
    x << -1.0, 2.0;
    Value v = tape.leaf(x);
    Value r = tape.relu(v);
    REQUIRE(r.data()(0, 0) == 0.0);
    REQUIRE(r.data()(0, 1) == 2.0);

    // uniform logits over 2 classes -> ln 2
    Matrix logits = Matrix::Zero(1, 2);
    Value ce = tape.softmax_cross_entropy(tape.leaf(logits), {1});
    REQUIRE(ce.scalar() == Catch::Approx(std::log(2.0)).margin(1e-12));

    // mean_abs(x, x) = 0
    Matrix y(2, 2);
    y << 1, 2, 3, 4;
    REQUIRE(tape.mean_abs(tape.leaf(y), y).scalar() == 0.0);
}

TEST_CASE("shape errors name both operands") {
    Tape tape;
    Value a = tape.leaf(Matrix::Zero(2, 3));
    Value b = tape.leaf(Matrix::Zero(2, 3));
    try {
        tape.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("2x3") != std::string::npos);
    }
    REQUIRE_THROWS_AS(tape.add_bias(a, tape.leaf(Matrix::Zero(1, 2))), ShapeError);
    REQUIRE_THROWS_AS(tape.concat(a, tape.leaf(Matrix::Zero(3, 3))), ShapeError);
    REQUIRE_THROWS_AS(tape.mean_abs(a, Matrix::Zero(3, 3)), ShapeError);
}

TEST_CASE("backward: x^2 at x=3 gives gradient 6") {
    Tape tape;
    Value x = tape.leaf(Matrix::Constant(1, 1, 3.0));
    Value y = tape.sum_sq(x);
    tape.backward(y);
    REQUIRE(x.grad()(0, 0) == Catch::Approx(6.0).margin(1e-14));
}

TEST_CASE("backward: disconnected leaf has zero gradient") {
    Tape tape;
    Value x = tape.leaf(Matrix::Constant(1, 1, 2.0));
    Value unused = tape.leaf(Matrix::Constant(3, 2, 1.0));
    Value y = tape.sum_sq(x);
    tape.backward(y);
    REQUIRE(unused.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: non-scalar root and double backward are contract errors") {
    Tape tape;
    Value x = tape.leaf(Matrix::Constant(2, 2, 1.0));
    REQUIRE_THROWS_AS(tape.backward(x), ContractError);

    Tape tape2;
    Value y = tape2.leaf(Matrix::Constant(1, 1, 1.0));
    Value s = tape2.sum_sq(y);
    tape2.backward(s);
    REQUIRE_THROWS_AS(tape2.backward(s), ContractError);
}

TEST_CASE("backward: random 2-layer MLP matches central differences") {
    Rng rng(101);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index n = 4, in = 5, hidden = 6;
        std::vector<Matrix> params = {random_matrix(rng, in, hidden), random_matrix(rng, 1, hidden),
                                      random_matrix(rng, hidden, 1), random_matrix(rng, 1, 1)};
        const Matrix x = random_matrix(rng, n, in);
        const Matrix target = random_matrix(rng, n, 1);

        auto eval = [&](const std::vector<Matrix>& p) {
            Tape t;
            Value h = t.relu(t.add_bias(t.matmul(t.leaf(x, false), t.leaf(p[0])), t.leaf(p[1])));
            Value out = t.add_bias(t.matmul(h, t.leaf(p[2])), t.leaf(p[3]));
            return t.mean_abs(out, target).scalar();
        };

        Tape t;
        std::vector<Value> leaves;
        for (const auto& p : params) leaves.push_back(t.leaf(p));
        Value h = t.relu(t.add_bias(t.matmul(t.leaf(x, false), leaves[0]), leaves[1]));
        Value out = t.add_bias(t.matmul(h, leaves[2]), leaves[3]);
        Value loss = t.mean_abs(out, target);
        t.backward(loss);

        std::vector<Matrix> grads;
        for (const auto& l : leaves) grads.push_back(l.grad());
        check_gradient(eval, params, grads, 1e-5, 1e-6);
    }
}

TEST_CASE("backward: trig, scale, clamp, broadcast, mean, softmax gradients") {
    Rng rng(202);
    const Eigen::Index n = 3, m = 4;
    std::vector<Matrix> params = {random_matrix(rng, n, m), random_matrix(rng, 1, m)};
    std::vector<std::int32_t> classes = {0, 2, 1};

    auto eval = [&](const std::vector<Matrix>& p) {
        Tape t;
        Value a = t.leaf(p[0]);
        Value b = t.leaf(p[1]);
        Value s = t.add(t.sin(a), t.cos(t.broadcast_row(b, n)));
        Value c = t.clamp(s, -0.75, 0.75);
        Value ce = t.softmax_cross_entropy(t.scale(c, 2.0), classes);
        return t.add(ce, t.mean(c)).scalar();
    };

    Tape t;
    Value a = t.leaf(params[0]);
    Value b = t.leaf(params[1]);
    Value s = t.add(t.sin(a), t.cos(t.broadcast_row(b, n)));
    Value c = t.clamp(s, -0.75, 0.75);
    Value ce = t.softmax_cross_entropy(t.scale(c, 2.0), classes);
    Value root = t.add(ce, t.mean(c));
    t.backward(root);

    check_gradient(eval, params, {a.grad(), b.grad()}, 1e-6, 1e-5);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Matrix p = Matrix::Constant(2, 2, 1.5);
    const Matrix g = Matrix::Zero(2, 2);
    AdamState state;
    state.learning_rate = 0.01;
    std::vector<Matrix*> params = {&p};
    std::vector<const Matrix*> grads = {&g};
    adam_step(params, grads, state);
    REQUIRE((p.array() == 1.5).all());
}

TEST_CASE("adam: first scalar step matches the hand-computed update") {
    Matrix p = Matrix::Constant(1, 1, 1.0);
    const Matrix g = Matrix::Constant(1, 1, 0.5);
    AdamState state;
    state.learning_rate = 0.01;
    std::vector<Matrix*> params = {&p};
    std::vector<const Matrix*> grads = {&g};
    adam_step(params, grads, state);
    // m_hat = g, v_hat = g^2 after bias correction at t=1, so the update is
    // -lr * g / (|g| + eps).
    const double expected = 1.0 - 0.01 * (0.5 / (0.5 + 1e-8));
    REQUIRE(p(0, 0) == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("adam: two identical runs stay bit-identical over 100 steps") {
    auto run = [] {
        Rng rng(7);
        Matrix p = random_matrix(rng, 4, 3);
        AdamState state;
        state.learning_rate = 1e-3;
        std::vector<Matrix*> params = {&p};
        for (int step = 0; step < 100; ++step) {
            const Matrix g = random_matrix(rng, 4, 3);
            std::vector<const Matrix*> grads = {&g};
            adam_step(params, grads, state);
        }
        return p;
    };
    const Matrix a = run(), b = run();
    REQUIRE((a.array() == b.array()).all());
}

TEST_CASE("adam: NaN gradient raises a diverged error") {
    Matrix p = Matrix::Constant(1, 1, 1.0);
    Matrix g = Matrix::Constant(1, 1, std::numeric_limits<double>::quiet_NaN());
    AdamState state;
    std::vector<Matrix*> params = {&p};
    std::vector<const Matrix*> grads = {&g};
    REQUIRE_THROWS_AS(adam_step(params, grads, state), TrainingDivergedError);
}
