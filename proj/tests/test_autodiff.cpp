#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "ctxppi/autodiff.hpp"
#include "ctxppi/optim.hpp"
#include "ctxppi/rng.hpp"

using namespace ctxppi;
using ad::NodeId;
using ad::Tape;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

// Reduce any matrix output to a scalar with fixed weights so every entry
// contributes to the loss.
NodeId weighted_sum(Tape& tape, NodeId out, const Matrix& weights) {
    return tape.sum(tape.hadamard(out, tape.leaf(weights)));
}

}  // namespace

TEST_CASE("primitive forward values", "[autodiff]") {
    Tape tape;
    Rng rng(1);

    const Matrix m = random_matrix(3, 3, rng);
    const NodeId mm = tape.matmul(tape.leaf(Matrix::identity(3)), tape.leaf(m));
    REQUIRE(tape.value(mm) == m);

    const NodeId sig = tape.sigmoid(tape.leaf(Matrix(1, 1, 0.0)));
    REQUIRE(tape.value(sig).data[0] == Catch::Approx(0.5));

    const NodeId soft = tape.segment_softmax(tape.leaf(Matrix(2, 1, 0.0)), {7, 7});
    REQUIRE(tape.value(soft).data[0] == Catch::Approx(0.5));
    REQUIRE(tape.value(soft).data[1] == Catch::Approx(0.5));

    const NodeId lr = tape.leaky_relu(tape.leaf(Matrix(1, 2, -1.0)), 0.2);
    REQUIRE(tape.value(lr).data[0] == Catch::Approx(-0.2));

    Matrix two(2, 2, 2.0);
    const NodeId sc = tape.scale(tape.leaf(two), 0.5);
    REQUIRE(tape.value(sc).data[3] == Catch::Approx(1.0));

    const NodeId cat = tape.rowwise_concat(tape.leaf(Matrix(2, 1, 1.0)),
                                           tape.leaf(Matrix(2, 2, 3.0)));
    REQUIRE(tape.value(cat).cols == 3);
    REQUIRE(tape.value(cat).at(1, 2) == Catch::Approx(3.0));

    const NodeId stk = tape.stack_rows(tape.leaf(Matrix(1, 2, 1.0)), tape.leaf(Matrix(2, 2, 4.0)));
    REQUIRE(tape.value(stk).rows == 3);
    REQUIRE(tape.value(stk).at(2, 0) == Catch::Approx(4.0));

    Matrix g(3, 2);
    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] = static_cast<double>(i);
    const NodeId gat = tape.gather_rows(tape.leaf(g), {2, 0});
    REQUIRE(tape.value(gat).at(0, 1) == Catch::Approx(5.0));
    const NodeId sct = tape.scatter_add_rows(gat, {1, 1}, 3);
    REQUIRE(tape.value(sct).at(1, 0) == Catch::Approx(4.0));  // rows 2 and 0 summed
    REQUIRE(tape.value(sct).at(0, 0) == Catch::Approx(0.0));
}

TEST_CASE("shape errors carry both shapes", "[autodiff]") {
    Tape tape;
    const NodeId a = tape.leaf(Matrix(2, 3));
    const NodeId b = tape.leaf(Matrix(2, 3));
    try {
        tape.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("(2x3)") != std::string::npos);
    }
    REQUIRE_THROWS_AS(tape.add(a, tape.leaf(Matrix(3, 2))), ShapeError);
    REQUIRE_THROWS_AS(tape.segment_softmax(tape.leaf(Matrix(2, 2)), {0, 0}), ShapeError);
}

TEST_CASE("backward on simple losses", "[autodiff]") {
    Rng rng(2);
    const Matrix w = random_matrix(3, 4, rng);

    SECTION("sum of entries gives all-ones gradient") {
        Tape tape;
        const NodeId leaf = tape.leaf(w, true);
        tape.backward(tape.sum(leaf));
        const Matrix g = tape.grad(leaf);
        for (double v : g.data) REQUIRE(v == Catch::Approx(1.0));
    }

    SECTION("half squared norm gives the matrix itself") {
        Tape tape;
        const NodeId leaf = tape.leaf(w, true);
        const NodeId loss = tape.scale(tape.sum(tape.hadamard(leaf, leaf)), 0.5);
        tape.backward(loss);
        const Matrix g = tape.grad(leaf);
        for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(g.data[i] == Catch::Approx(w.data[i]));
    }

    SECTION("non-scalar loss rejected") {
        Tape tape;
        const NodeId leaf = tape.leaf(w, true);
        REQUIRE_THROWS_AS(tape.backward(leaf), ContractViolation);
    }
}

TEST_CASE("gradients are independent of unrelated tape entries", "[autodiff]") {
    Rng rng(3);
    const Matrix w = random_matrix(2, 2, rng);
    Matrix grad_plain, grad_noisy;
    {
        Tape tape;
        const NodeId leaf = tape.leaf(w, true);
        tape.backward(tape.sum(tape.sigmoid(leaf)));
        grad_plain = tape.grad(leaf);
    }
    {
        Tape tape;
        const NodeId leaf = tape.leaf(w, true);
        const NodeId loss = tape.sum(tape.sigmoid(leaf));
        // dangling branch sharing the same leaf, never reaching the loss
        tape.sum(tape.matmul(leaf, tape.leaf(random_matrix(2, 5, rng), true)));
        tape.backward(loss);
        grad_noisy = tape.grad(leaf);
    }
    REQUIRE(grad_plain == grad_noisy);
}

TEST_CASE("grad_check validates every primitive", "[autodiff][oracle]") {
    Rng rng(20240818);

    auto check = [&](const char* name, auto&& build, std::size_t rows, std::size_t cols,
                     double lo = -1.0, double hi = 1.0) {
        Matrix x = random_matrix(rows, cols, rng, lo, hi);
        const double err = ad::grad_check(
            [&](const Matrix& probe, Matrix* grad_out) {
                Tape tape;
                const NodeId leaf = tape.leaf(probe, true);
                const NodeId loss = build(tape, leaf);
                const double value = tape.value(loss).data[0];
                if (grad_out) {
                    tape.backward(loss);
                    *grad_out = tape.grad(leaf);
                }
                return value;
            },
            x, 1e-5);
        INFO(name);
        REQUIRE(err < 1e-4);
    };

    // Everything the builders close over is drawn once, outside grad_check,
    // so repeated evaluations see the same function.
    const Matrix w4x3 = random_matrix(4, 3, rng);
    const Matrix w3x4 = random_matrix(3, 4, rng);
    const Matrix w2x4 = random_matrix(2, 4, rng);
    const Matrix w3x1 = random_matrix(3, 1, rng);
    const Matrix w6x1 = random_matrix(6, 1, rng);
    const Matrix red4x4 = random_matrix(4, 4, rng);
    const Matrix red3x3 = random_matrix(3, 3, rng);
    const Matrix red3x4 = random_matrix(3, 4, rng);
    const Matrix red3x7 = random_matrix(3, 7, rng);
    const Matrix red5x4 = random_matrix(5, 4, rng);
    const Matrix red6x4 = random_matrix(6, 4, rng);
    const Matrix red5x1 = random_matrix(5, 1, rng);

    check("matmul lhs", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.matmul(x, t.leaf(w4x3)), red3x3);
    }, 3, 4);
    check("matmul rhs", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.matmul(t.leaf(w3x4), x), red3x3);
    }, 4, 3);
    check("add", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.add(x, t.leaf(w3x4)), red3x4);
    }, 3, 4);
    check("scale", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.scale(x, -1.7), red3x4);
    }, 3, 4);
    check("rowwise_concat", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.rowwise_concat(x, t.leaf(w3x4)), red3x7);
    }, 3, 3);
    check("stack_rows", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.stack_rows(x, t.leaf(w2x4)), red5x4);
    }, 3, 4);
    check("gather_rows", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.gather_rows(x, {2, 0, 1, 2, 2, 0}), red6x4);
    }, 3, 4);
    check("scatter_add_rows", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.scatter_add_rows(x, {1, 3, 1}, 4), red4x4);
    }, 3, 4);
    check("leaky_relu", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.leaky_relu(x, 0.2), red3x4);
    }, 3, 4);
    check("sigmoid", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.sigmoid(x), red3x4);
    }, 3, 4);
    check("log", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.log(x), red3x4);
    }, 3, 4, 0.5, 1.5);
    check("segment_softmax", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.segment_softmax(x, {0, 0, 0, 1, 1}), red5x1);
    }, 5, 1);
    check("hadamard", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.hadamard(x, t.leaf(w3x4)), red3x4);
    }, 3, 4);
    check("row_scale values", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.row_scale(x, t.leaf(w3x1)), red3x4);
    }, 3, 4);
    check("row_scale scales", [&](Tape& t, NodeId x) {
        return weighted_sum(t, t.row_scale(t.leaf(w3x4), x), red3x4);
    }, 3, 1);
    check("bce_loss", [&](Tape& t, NodeId x) {
        return ad::bce_loss(t, x, {1, 0, 1, 0, 1});
    }, 5, 1);
    check("composite attention-style block", [&](Tape& t, NodeId x) {
        const NodeId hw = t.matmul(x, t.leaf(w4x3));
        const NodeId src = t.gather_rows(hw, {0, 1, 2, 0});
        const NodeId dst = t.gather_rows(hw, {1, 1, 2, 2});
        const NodeId score = t.leaky_relu(
            t.matmul(t.rowwise_concat(dst, src), t.leaf(w6x1)), 0.2);
        const NodeId alpha = t.segment_softmax(score, {1, 1, 2, 2});
        const NodeId agg = t.scatter_add_rows(t.row_scale(src, alpha), {1, 1, 2, 2}, 3);
        return weighted_sum(t, t.sigmoid(agg), red3x3);
    }, 3, 4);
}

TEST_CASE("grad_check basics", "[autodiff]") {
    Rng rng(5);
    Matrix x = random_matrix(2, 3, rng);

    SECTION("quadratic is exact to central-difference accuracy") {
        const double err = ad::grad_check(
            [](const Matrix& probe, Matrix* grad_out) {
                Tape tape;
                const NodeId leaf = tape.leaf(probe, true);
                const NodeId loss = tape.scale(tape.sum(tape.hadamard(leaf, leaf)), 0.5);
                if (grad_out) {
                    tape.backward(loss);
                    *grad_out = tape.grad(leaf);
                }
                return tape.value(loss).data[0];
            },
            x, 1e-5);
        REQUIRE(err < 1e-6);
    }

    SECTION("constant function has zero error") {
        const double err = ad::grad_check(
            [](const Matrix& probe, Matrix* grad_out) {
                if (grad_out) *grad_out = Matrix(probe.rows, probe.cols);
                return 3.5;
            },
            x, 1e-5);
        REQUIRE(err == 0.0);
    }

    SECTION("eps outside (0, 1e-3] rejected") {
        auto f = [](const Matrix& probe, Matrix* grad_out) {
            if (grad_out) *grad_out = Matrix(probe.rows, probe.cols);
            return 0.0;
        };
        REQUIRE_THROWS_AS(ad::grad_check(f, x, 0.0), ContractViolation);
        REQUIRE_THROWS_AS(ad::grad_check(f, x, 1e-2), ContractViolation);
    }
}

TEST_CASE("segment_softmax sums to one within every segment", "[autodiff]") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        Matrix x(n, 1);
        std::vector<std::uint32_t> seg(n);
        std::uint32_t cur = 0;
        for (std::size_t i = 0; i < n; ++i) {
            x.data[i] = rng.uniform(-5.0, 5.0);
            if (i && rng.u01() < 0.3) ++cur;
            seg[i] = cur;
        }
        Tape tape;
        const Matrix out = tape.value(tape.segment_softmax(tape.leaf(x), seg));
        std::map<std::uint32_t, double> sums;
        for (std::size_t i = 0; i < n; ++i) sums[seg[i]] += out.data[i];
        for (const auto& [s, total] : sums) REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("adam_step behavior", "[autodiff]") {
    SECTION("zero gradient leaves parameters unchanged") {
        Matrix w(2, 2, 1.5);
        const Matrix before = w;
        const Matrix g(2, 2, 0.0);
        auto state = ad::AdamState::init({&w});
        ad::adam_step({&w}, {&g}, state);
        REQUIRE(w == before);
        REQUIRE(state.step == 1);
    }

    SECTION("first step with constant gradient moves by about lr") {
        Matrix w(1, 3, 0.0);
        Matrix g(1, 3);
        g.data = {1.0, -2.0, 0.5};
        auto state = ad::AdamState::init({&w}, 1e-3);
        ad::adam_step({&w}, {&g}, state);
        for (std::size_t i = 0; i < 3; ++i) {
            const double expected = -1e-3 * g.data[i] / (std::abs(g.data[i]) + 1e-8);
            REQUIRE(w.data[i] == Catch::Approx(expected).margin(1e-12));
            REQUIRE(std::abs(w.data[i]) == Catch::Approx(1e-3).epsilon(1e-4));
        }
    }

    SECTION("identical inputs give identical results") {
        auto run = [] {
            Matrix w(2, 2, 0.3);
            Matrix g(2, 2, 0.7);
            auto state = ad::AdamState::init({&w}, 1e-2);
            for (int i = 0; i < 5; ++i) ad::adam_step({&w}, {&g}, state);
            return w;
        };
        REQUIRE(run() == run());
    }

    SECTION("shape mismatch rejected") {
        Matrix w(2, 2);
        const Matrix g(3, 2);
        auto state = ad::AdamState::init({&w});
        REQUIRE_THROWS_AS(ad::adam_step({&w}, {&g}, state), ShapeError);
    }
}
