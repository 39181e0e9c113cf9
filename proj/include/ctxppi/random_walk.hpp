#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "ctxppi/errors.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/matrix.hpp"
#include "ctxppi/model.hpp"
#include "ctxppi/rng.hpp"

namespace ctxppi {

struct RandomWalkOptions {
    std::size_t walks_per_node = 10;
    std::size_t walk_length = 20;
    std::size_t window = 5;
    std::size_t power_iterations = 3;
};

namespace detail {

// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
// Returns eigenvalues; V's columns hold the eigenvectors.
inline std::vector<double> jacobi_eigen(Matrix a, Matrix& v) {
    const std::size_t n = a.rows;
    v = Matrix::identity(n);
    for (std::size_t sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a.at(p, q)) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a.at(i, i);
    return eig;
}

// Modified Gram-Schmidt, in place. Near-zero columns are re-seeded with unit
// basis vectors to keep the basis full rank.
inline void orthonormalize(Matrix& y) {
    for (std::size_t j = 0; j < y.cols; ++j) {
        for (std::size_t k = 0; k < j; ++k) {
            double proj = 0.0;
            for (std::size_t i = 0; i < y.rows; ++i) proj += y.at(i, j) * y.at(i, k);
            for (std::size_t i = 0; i < y.rows; ++i) y.at(i, j) -= proj * y.at(i, k);
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < y.rows; ++i) nrm += y.at(i, j) * y.at(i, j);
        nrm = std::sqrt(nrm);
        if (nrm < 1e-12) {
            for (std::size_t i = 0; i < y.rows; ++i) y.at(i, j) = (i == j % y.rows) ? 1.0 : 0.0;
            nrm = 1.0;
        }
        for (std::size_t i = 0; i < y.rows; ++i) y.at(i, j) /= nrm;
    }
}

using SparseRows = std::vector<std::vector<std::pair<std::uint32_t, double>>>;

inline Matrix sparse_times_dense(const SparseRows& m, const Matrix& x) {
    Matrix y(m.size(), x.cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        double* yr = y.row(i);
        for (const auto& [j, val] : m[i]) {
            const double* xr = x.row(j);
            for (std::size_t k = 0; k < x.cols; ++k) yr[k] += val * xr[k];
        }
    }
    return y;
}

}  // namespace detail

// Context-free baseline embeddings: uniform random walks, window co-occurrence
// counts, positive PMI, then a rank-`dim` symmetric factorization by seeded
// randomized subspace iteration. One embedding per protein.
inline Matrix random_walk_embeddings(const GlobalPPI& graph, std::size_t dim, std::uint64_t seed,
                                     const RandomWalkOptions& opt = {}) {
    const std::size_t n = graph.n_proteins();
    if (dim > n)
        throw ContractViolation("random_walk_embeddings: dim " + std::to_string(dim) +
                                " exceeds node count " + std::to_string(n));
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (const auto& [u, v] : graph.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }

    Rng rng = Rng(seed).fork("random_walk");
    std::unordered_map<std::uint64_t, double> counts;
    std::vector<double> row_totals(n, 0.0);
    double total = 0.0;
    std::vector<std::uint32_t> walk;
    for (std::uint32_t start = 0; start < n; ++start) {
        for (std::size_t w = 0; w < opt.walks_per_node; ++w) {
            walk.clear();
            std::uint32_t cur = start;
            walk.push_back(cur);
            for (std::size_t step = 1; step < opt.walk_length; ++step) {
                if (adj[cur].empty()) break;
                cur = adj[cur][rng.below(adj[cur].size())];
                walk.push_back(cur);
            }
            for (std::size_t i = 0; i < walk.size(); ++i) {
                const std::size_t end = std::min(walk.size(), i + 1 + opt.window);
                for (std::size_t j = i + 1; j < end; ++j) {
                    const std::uint32_t a = walk[i], b = walk[j];
                    counts[(static_cast<std::uint64_t>(a) << 32) | b] += 1.0;
                    counts[(static_cast<std::uint64_t>(b) << 32) | a] += 1.0;
                    row_totals[a] += 1.0;
                    row_totals[b] += 1.0;
                    total += 2.0;
                }
            }
        }
    }

    // Positive PMI rows, sorted for determinism.
    detail::SparseRows ppmi(n);
    for (const auto& [key, c] : counts) {
        const auto a = static_cast<std::uint32_t>(key >> 32);
        const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
        if (row_totals[a] == 0.0 || row_totals[b] == 0.0) continue;
        const double pmi = std::log(c * total / (row_totals[a] * row_totals[b]));
        if (pmi > 0.0) ppmi[a].push_back({b, pmi});
    }
    for (auto& row : ppmi) std::sort(row.begin(), row.end());

    Matrix q(n, dim);
    for (auto& v : q.data) v = rng.normal();
    detail::orthonormalize(q);
    for (std::size_t it = 0; it < opt.power_iterations; ++it) {
        q = detail::sparse_times_dense(ppmi, q);
        detail::orthonormalize(q);
    }

    // Rayleigh-Ritz on the subspace: B = Q^T M Q, then eigenvectors back out.
    const Matrix mq = detail::sparse_times_dense(ppmi, q);
    Matrix b(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += q.at(r, i) * mq.at(r, j);
            b.at(i, j) = s;
        }
    for (std::size_t i = 0; i < dim; ++i)  // symmetrize roundoff
        for (std::size_t j = i + 1; j < dim; ++j) {
            const double avg = 0.5 * (b.at(i, j) + b.at(j, i));
            b.at(i, j) = avg;
            b.at(j, i) = avg;
        }
    Matrix v;
    auto eig = detail::jacobi_eigen(b, v);

    std::vector<std::size_t> order(dim);
    for (std::size_t i = 0; i < dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a2, std::size_t b2) { return eig[a2] > eig[b2]; });

    Matrix scaled(dim, dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const double s = std::sqrt(std::max(eig[order[j]], 0.0));
        for (std::size_t i = 0; i < dim; ++i) scaled.at(i, j) = v.at(i, order[j]) * s;
    }
    return matmul(q, scaled);
}

// Wraps context-free per-protein embeddings into an EmbeddingTable with the
// same activation pattern as the knowledge graph, so baselines score exactly
// the (gene, context) pairs the contextual model scores. Cell-node rows are
// zero; baselines have no cell representations.
inline EmbeddingTable table_from_global_embeddings(const KnowledgeGraph& kg,
                                                   const Matrix& embeddings) {
    if (embeddings.rows != kg.global.n_proteins())
        throw ShapeError("table_from_global_embeddings: " + std::to_string(embeddings.rows) +
                         " rows for " + std::to_string(kg.global.n_proteins()) + " proteins");
    EmbeddingTable table;
    table.dim = embeddings.cols;
    table.protein_names = kg.global.proteins;
    table.n_subtypes = kg.metagraph.subtype_nodes.size();
    for (const auto& ctx : kg.contexts) {
        EmbeddingTable::ContextBlock blk;
        blk.context_id = ctx.context_id;
        blk.protein_ids = ctx.nodes;
        blk.embeddings = Matrix(ctx.nodes.size(), table.dim);
        for (std::size_t r = 0; r < ctx.nodes.size(); ++r)
            std::copy(embeddings.row(ctx.nodes[r]), embeddings.row(ctx.nodes[r]) + table.dim,
                      blk.embeddings.row(r));
        table.contexts.push_back(std::move(blk));
    }
    table.cell_labels = kg.metagraph.subtype_nodes;
    table.cell_labels.insert(table.cell_labels.end(), kg.metagraph.celltype_nodes.begin(),
                             kg.metagraph.celltype_nodes.end());
    table.cell_embeddings = Matrix(table.cell_labels.size(), table.dim);
    return table;
}

}  // namespace ctxppi
