#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ctxppi/errors.hpp"
#include "ctxppi/matrix.hpp"

namespace ctxppi::ad {

enum class Op {
    Leaf,
    MatMul,
    Add,
    Scale,
    RowwiseConcat,
    StackRows,
    GatherRows,
    ScatterAddRows,
    LeakyRelu,
    Sigmoid,
    Log,
    SegmentSoftmax,
    Hadamard,
    RowScale,
    Sum,
};

using NodeId = int;

// Record-and-replay reverse-mode engine over dense matrices. One tape per
// loss evaluation; nodes are appended in topological order by construction.
class Tape {
public:
    NodeId leaf(Matrix value, bool trainable = false) {
        Node n;
        n.op = Op::Leaf;
        n.value = std::move(value);
        n.trainable = trainable;
        n.needs_grad = trainable;
        return push(std::move(n));
    }

    NodeId matmul(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        Node n = binary(Op::MatMul, a, b);
        n.value = ctxppi::matmul(A, B);
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        require_same_shape(A, B, "add");
        Node n = binary(Op::Add, a, b);
        n.value = A;
        for (std::size_t i = 0; i < B.size(); ++i) n.value.data[i] += B.data[i];
        return push(std::move(n));
    }

    NodeId scale(NodeId a, double s) {
        Node n = unary(Op::Scale, a);
        n.scalar = s;
        n.value = value(a);
        for (auto& v : n.value.data) v *= s;
        return push(std::move(n));
    }

    // [A | B]: rows kept, columns appended.
    NodeId rowwise_concat(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        if (A.rows != B.rows)
            throw ShapeError("rowwise_concat: row mismatch " + A.shape_str() + " vs " +
                             B.shape_str());
        Node n = binary(Op::RowwiseConcat, a, b);
        n.value = Matrix(A.rows, A.cols + B.cols);
        for (std::size_t i = 0; i < A.rows; ++i) {
            double* out = n.value.row(i);
            const double* ra = A.row(i);
            const double* rb = B.row(i);
            for (std::size_t j = 0; j < A.cols; ++j) out[j] = ra[j];
            for (std::size_t j = 0; j < B.cols; ++j) out[A.cols + j] = rb[j];
        }
        return push(std::move(n));
    }

    // [A ; B]: columns kept, rows appended.
    NodeId stack_rows(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        if (A.cols != B.cols)
            throw ShapeError("stack_rows: column mismatch " + A.shape_str() + " vs " +
                             B.shape_str());
        Node n = binary(Op::StackRows, a, b);
        n.value = Matrix(A.rows + B.rows, A.cols);
        std::copy(A.data.begin(), A.data.end(), n.value.data.begin());
        std::copy(B.data.begin(), B.data.end(), n.value.data.begin() + A.size());
        return push(std::move(n));
    }

    NodeId gather_rows(NodeId a, std::vector<std::uint32_t> idx) {
        const Matrix& A = value(a);
        for (auto i : idx)
            if (i >= A.rows)
                throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for " +
                                 A.shape_str());
        Node n = unary(Op::GatherRows, a);
        n.value = Matrix(idx.size(), A.cols);
        for (std::size_t r = 0; r < idx.size(); ++r)
            std::copy(A.row(idx[r]), A.row(idx[r]) + A.cols, n.value.row(r));
        n.idx = std::move(idx);
        return push(std::move(n));
    }

    // out[idx[r]] += a[r]; rows with no incoming index stay zero.
    NodeId scatter_add_rows(NodeId a, std::vector<std::uint32_t> idx, std::size_t out_rows) {
        const Matrix& A = value(a);
        if (idx.size() != A.rows)
            throw ShapeError("scatter_add_rows: " + std::to_string(idx.size()) +
                             " indices for " + A.shape_str());
        for (auto i : idx)
            if (i >= out_rows)
                throw ShapeError("scatter_add_rows: index " + std::to_string(i) +
                                 " out of range for " + std::to_string(out_rows) + " rows");
        Node n = unary(Op::ScatterAddRows, a);
        n.value = Matrix(out_rows, A.cols);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            double* out = n.value.row(idx[r]);
            const double* src = A.row(r);
            for (std::size_t j = 0; j < A.cols; ++j) out[j] += src[j];
        }
        n.idx = std::move(idx);
        return push(std::move(n));
    }

    NodeId leaky_relu(NodeId a, double slope = 0.2) {
        Node n = unary(Op::LeakyRelu, a);
        n.scalar = slope;
        n.value = value(a);
        for (auto& v : n.value.data) v = v > 0.0 ? v : slope * v;
        return push(std::move(n));
    }

    NodeId sigmoid(NodeId a) {
        Node n = unary(Op::Sigmoid, a);
        n.value = value(a);
        for (auto& v : n.value.data) v = stable_sigmoid(v);
        return push(std::move(n));
    }

    NodeId log(NodeId a) {
        Node n = unary(Op::Log, a);
        n.value = value(a);
        for (auto& v : n.value.data) v = std::log(v);
        return push(std::move(n));
    }

    // Column vector normalized to sum 1 within each run of equal segment ids.
    // Segment ids must be grouped (nondecreasing).
    NodeId segment_softmax(NodeId a, std::vector<std::uint32_t> segments) {
        const Matrix& A = value(a);
        if (A.cols != 1)
            throw ShapeError("segment_softmax: expected column vector, got " + A.shape_str());
        if (segments.size() != A.rows)
            throw ShapeError("segment_softmax: " + std::to_string(segments.size()) +
                             " segment ids for " + A.shape_str());
        for (std::size_t i = 1; i < segments.size(); ++i)
            if (segments[i] < segments[i - 1])
                throw ContractViolation("segment_softmax: segment ids must be nondecreasing");
        Node n = unary(Op::SegmentSoftmax, a);
        n.value = A;
        std::size_t start = 0;
        while (start < segments.size()) {
            std::size_t end = start;
            while (end < segments.size() && segments[end] == segments[start]) ++end;
            double mx = n.value.data[start];
            for (std::size_t i = start; i < end; ++i) mx = std::max(mx, n.value.data[i]);
            double sum = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                n.value.data[i] = std::exp(n.value.data[i] - mx);
                sum += n.value.data[i];
            }
            for (std::size_t i = start; i < end; ++i) n.value.data[i] /= sum;
            start = end;
        }
        n.idx = std::move(segments);
        return push(std::move(n));
    }

    NodeId hadamard(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        require_same_shape(A, B, "hadamard");
        Node n = binary(Op::Hadamard, a, b);
        n.value = A;
        for (std::size_t i = 0; i < B.size(); ++i) n.value.data[i] *= B.data[i];
        return push(std::move(n));
    }

    // Each row of `a` scaled by the matching entry of column vector `s`.
    NodeId row_scale(NodeId a, NodeId s) {
        const Matrix& A = value(a);
        const Matrix& S = value(s);
        if (S.cols != 1 || S.rows != A.rows)
            throw ShapeError("row_scale: scales " + S.shape_str() + " for " + A.shape_str());
        Node n = binary(Op::RowScale, a, s);
        n.value = A;
        for (std::size_t i = 0; i < A.rows; ++i) {
            double* r = n.value.row(i);
            for (std::size_t j = 0; j < A.cols; ++j) r[j] *= S.data[i];
        }
        return push(std::move(n));
    }

    NodeId sum(NodeId a) {
        Node n = unary(Op::Sum, a);
        n.value = Matrix(1, 1);
        for (double v : value(a).data) n.value.data[0] += v;
        return push(std::move(n));
    }

    const Matrix& value(NodeId id) const { return nodes_.at(id).value; }

    bool is_trainable(NodeId id) const { return nodes_.at(id).trainable; }

    // Reverse pass from a scalar loss. Gradients accumulate only along paths
    // that reach the loss, so unrelated tape entries cannot perturb results.
    void backward(NodeId loss) {
        Node& ln = nodes_.at(loss);
        if (ln.value.rows != 1 || ln.value.cols != 1)
            throw ContractViolation("backward: loss must be scalar, got " + ln.value.shape_str());
        for (auto& n : nodes_) n.grad = Matrix();
        ln.grad = Matrix(1, 1, 1.0);
        for (NodeId id = loss; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.grad.size() == 0 || n.op == Op::Leaf) continue;
            propagate(n);
        }
    }

    // Zero matrix when no gradient reached the node.
    Matrix grad(NodeId id) const {
        const Node& n = nodes_.at(id);
        if (n.grad.size() == 0) return Matrix(n.value.rows, n.value.cols);
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

private:
    struct Node {
        Op op = Op::Leaf;
        NodeId a = -1, b = -1;
        Matrix value;
        Matrix grad;
        double scalar = 0.0;
        std::vector<std::uint32_t> idx;
        bool trainable = false;
        bool needs_grad = false;
    };

    static double stable_sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    Node unary(Op op, NodeId a) {
        Node n;
        n.op = op;
        n.a = a;
        n.needs_grad = nodes_.at(a).needs_grad;
        return n;
    }

    Node binary(Op op, NodeId a, NodeId b) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.needs_grad = nodes_.at(a).needs_grad || nodes_.at(b).needs_grad;
        return n;
    }

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    Matrix& grad_buf(NodeId id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) n.grad = Matrix(n.value.rows, n.value.cols);
        return n.grad;
    }

    void propagate(Node& n) {
        const Matrix& g = n.grad;
        const bool need_a = n.a >= 0 && nodes_[n.a].needs_grad;
        const bool need_b = n.b >= 0 && nodes_[n.b].needs_grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Matrix& A = nodes_[n.a].value;
                const Matrix& B = nodes_[n.b].value;
                if (need_a) {  // dA += g * B^T
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t i = 0; i < A.rows; ++i)
                        for (std::size_t k = 0; k < A.cols; ++k) {
                            double s = 0.0;
                            const double* gr = g.row(i);
                            const double* br = B.row(k);
                            for (std::size_t j = 0; j < B.cols; ++j) s += gr[j] * br[j];
                            da.at(i, k) += s;
                        }
                }
                if (need_b) {  // dB += A^T * g
                    Matrix& db = grad_buf(n.b);
                    for (std::size_t i = 0; i < A.rows; ++i) {
                        const double* ar = A.row(i);
                        const double* gr = g.row(i);
                        for (std::size_t k = 0; k < A.cols; ++k) {
                            const double av = ar[k];
                            if (av == 0.0) continue;
                            double* dbr = db.row(k);
                            for (std::size_t j = 0; j < B.cols; ++j) dbr[j] += av * gr[j];
                        }
                    }
                }
                break;
            }
            case Op::Add: {
                if (need_a) accumulate(grad_buf(n.a), g);
                if (need_b) accumulate(grad_buf(n.b), g);
                break;
            }
            case Op::Scale: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += n.scalar * g.data[i];
                }
                break;
            }
            case Op::RowwiseConcat: {
                const std::size_t ca = nodes_[n.a].value.cols;
                const std::size_t cb = nodes_[n.b].value.cols;
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t i = 0; i < g.rows; ++i)
                        for (std::size_t j = 0; j < ca; ++j) da.at(i, j) += g.at(i, j);
                }
                if (need_b) {
                    Matrix& db = grad_buf(n.b);
                    for (std::size_t i = 0; i < g.rows; ++i)
                        for (std::size_t j = 0; j < cb; ++j) db.at(i, j) += g.at(i, ca + j);
                }
                break;
            }
            case Op::StackRows: {
                const std::size_t ra = nodes_[n.a].value.rows;
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t i = 0; i < da.size(); ++i) da.data[i] += g.data[i];
                }
                if (need_b) {
                    Matrix& db = grad_buf(n.b);
                    const std::size_t off = ra * g.cols;
                    for (std::size_t i = 0; i < db.size(); ++i) db.data[i] += g.data[off + i];
                }
                break;
            }
            case Op::GatherRows: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t r = 0; r < n.idx.size(); ++r) {
                        double* out = da.row(n.idx[r]);
                        const double* src = g.row(r);
                        for (std::size_t j = 0; j < g.cols; ++j) out[j] += src[j];
                    }
                }
                break;
            }
            case Op::ScatterAddRows: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t r = 0; r < n.idx.size(); ++r) {
                        double* out = da.row(r);
                        const double* src = g.row(n.idx[r]);
                        for (std::size_t j = 0; j < g.cols; ++j) out[j] += src[j];
                    }
                }
                break;
            }
            case Op::LeakyRelu: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    const Matrix& x = nodes_[n.a].value;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        da.data[i] += g.data[i] * (x.data[i] > 0.0 ? 1.0 : n.scalar);
                }
                break;
            }
            case Op::Sigmoid: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const double y = n.value.data[i];
                        da.data[i] += g.data[i] * y * (1.0 - y);
                    }
                }
                break;
            }
            case Op::Log: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    const Matrix& x = nodes_[n.a].value;
                    for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] / x.data[i];
                }
                break;
            }
            case Op::SegmentSoftmax: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    std::size_t start = 0;
                    while (start < n.idx.size()) {
                        std::size_t end = start;
                        while (end < n.idx.size() && n.idx[end] == n.idx[start]) ++end;
                        double inner = 0.0;
                        for (std::size_t i = start; i < end; ++i)
                            inner += n.value.data[i] * g.data[i];
                        for (std::size_t i = start; i < end; ++i)
                            da.data[i] += n.value.data[i] * (g.data[i] - inner);
                        start = end;
                    }
                }
                break;
            }
            case Op::Hadamard: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    const Matrix& B = nodes_[n.b].value;
                    for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * B.data[i];
                }
                if (need_b) {
                    Matrix& db = grad_buf(n.b);
                    const Matrix& A = nodes_[n.a].value;
                    for (std::size_t i = 0; i < g.size(); ++i) db.data[i] += g.data[i] * A.data[i];
                }
                break;
            }
            case Op::RowScale: {
                const Matrix& A = nodes_[n.a].value;
                const Matrix& S = nodes_[n.b].value;
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    for (std::size_t i = 0; i < g.rows; ++i) {
                        const double s = S.data[i];
                        double* dar = da.row(i);
                        const double* gr = g.row(i);
                        for (std::size_t j = 0; j < g.cols; ++j) dar[j] += gr[j] * s;
                    }
                }
                if (need_b) {
                    Matrix& ds = grad_buf(n.b);
                    for (std::size_t i = 0; i < g.rows; ++i) {
                        const double* ar = A.row(i);
                        const double* gr = g.row(i);
                        double s = 0.0;
                        for (std::size_t j = 0; j < g.cols; ++j) s += gr[j] * ar[j];
                        ds.data[i] += s;
                    }
                }
                break;
            }
            case Op::Sum: {
                if (need_a) {
                    Matrix& da = grad_buf(n.a);
                    const double gv = g.data[0];
                    for (auto& v : da.data) v += gv;
                }
                break;
            }
        }
    }

    static void accumulate(Matrix& dst, const Matrix& src) {
        for (std::size_t i = 0; i < src.size(); ++i) dst.data[i] += src.data[i];
    }

    std::vector<Node> nodes_;
};

// Row-wise dot products of two equally shaped matrices, as hadamard followed
// by a ones-vector reduction. Returns an n x 1 column.
inline NodeId rowwise_dot(Tape& tape, NodeId a, NodeId b, std::size_t dim) {
    return tape.matmul(tape.hadamard(a, b), tape.leaf(Matrix(dim, 1, 1.0)));
}

// Mean binary cross-entropy of logit scores against constant 0/1 labels.
// log(1 - sigmoid(x)) is computed as log(sigmoid(-x)) for stability.
inline NodeId bce_loss(Tape& tape, NodeId scores, const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    if (n == 0) throw ContractViolation("bce_loss: empty batch");
    Matrix y(n, 1), y_inv(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        y.data[i] = labels[i] ? 1.0 : 0.0;
        y_inv.data[i] = labels[i] ? 0.0 : 1.0;
    }
    const NodeId log_p = tape.log(tape.sigmoid(scores));
    const NodeId log_1mp = tape.log(tape.sigmoid(tape.scale(scores, -1.0)));
    const NodeId term = tape.add(tape.hadamard(tape.leaf(std::move(y)), log_p),
                                 tape.hadamard(tape.leaf(std::move(y_inv)), log_1mp));
    return tape.scale(tape.sum(term), -1.0 / static_cast<double>(n));
}

// Max relative error between the analytic gradient and central differences.
// `f(x, grad_out)` returns the scalar; when grad_out is non-null it must also
// produce the analytic gradient w.r.t. x.
template <typename F>
double grad_check(F&& f, const Matrix& x, double eps = 1e-5) {
    if (!(eps > 0.0) || eps > 1e-3)
        throw ContractViolation("grad_check: eps must be in (0, 1e-3]");
    Matrix analytic;
    const double base = f(x, &analytic);
    if (!std::isfinite(base) || !analytic.all_finite())
        throw NumericalError("grad_check: non-finite analytic evaluation");
    if (analytic.rows != x.rows || analytic.cols != x.cols)
        throw ShapeError("grad_check: gradient shape " + analytic.shape_str() + " vs input " +
                         x.shape_str());
    double worst = 0.0;
    Matrix probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + eps;
        const double up = f(probe, nullptr);
        probe.data[i] = orig - eps;
        const double down = f(probe, nullptr);
        probe.data[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericalError("grad_check: non-finite probe evaluation");
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::abs(analytic.data[i]) + std::abs(numeric) + 1e-12;
        worst = std::max(worst, std::abs(analytic.data[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace ctxppi::ad
