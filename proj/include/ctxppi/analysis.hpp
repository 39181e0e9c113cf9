#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ctxppi/errors.hpp"
#include "ctxppi/matrix.hpp"
#include "ctxppi/metrics.hpp"
#include "ctxppi/model.hpp"

namespace ctxppi {

inline double cosine(const double* u, const double* v, std::size_t n) {
    const double nu = norm2(u, n);
    const double nv = norm2(v, n);
    if (nu == 0.0 || nv == 0.0) throw DegenerateVector("cosine: zero-norm input");
    return dot(u, v, n) / (nu * nv);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw ShapeError("cosine: dimension mismatch");
    return cosine(u.data(), v.data(), u.size());
}

struct SimilarityMatrix {
    std::vector<std::string> labels;
    Matrix values;  // symmetric, unit diagonal
};

namespace detail {

// Average-linkage agglomerative clustering on 1 - cosine; returns the
// dendrogram leaf order. Ties merge the lexicographically smallest cluster
// index pair, so the order is deterministic.
inline std::vector<std::size_t> cluster_leaf_order(const Matrix& sim) {
    const std::size_t n = sim.rows;
    if (n <= 2) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        return order;
    }
    struct Cluster {
        std::vector<std::size_t> leaves;
        bool alive = true;
    };
    std::vector<Cluster> clusters(n);
    for (std::size_t i = 0; i < n; ++i) clusters[i].leaves = {i};

    auto linkage = [&](const Cluster& a, const Cluster& b) {
        double s = 0.0;
        for (auto i : a.leaves)
            for (auto j : b.leaves) s += 1.0 - sim.at(i, j);
        return s / static_cast<double>(a.leaves.size() * b.leaves.size());
    };

    for (std::size_t merges = 0; merges + 1 < n; ++merges) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            if (!clusters[i].alive) continue;
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                if (!clusters[j].alive) continue;
                const double d = linkage(clusters[i], clusters[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        Cluster merged;
        merged.leaves = clusters[bi].leaves;
        merged.leaves.insert(merged.leaves.end(), clusters[bj].leaves.begin(),
                             clusters[bj].leaves.end());
        clusters[bi].alive = false;
        clusters[bj].alive = false;
        clusters.push_back(std::move(merged));
    }
    return clusters.back().leaves;
}

inline SimilarityMatrix ordered_similarity(const std::vector<std::string>& labels,
                                           const Matrix& sim) {
    const auto order = cluster_leaf_order(sim);
    SimilarityMatrix out;
    out.values = Matrix(sim.rows, sim.cols);
    for (std::size_t i = 0; i < order.size(); ++i) {
        out.labels.push_back(labels[order[i]]);
        for (std::size_t j = 0; j < order.size(); ++j)
            out.values.at(i, j) = sim.at(order[i], order[j]);
    }
    return out;
}

}  // namespace detail

// Pairwise cosine similarity of one gene's embeddings across the contexts in
// which it is active, rows ordered by clustering for heatmap readability.
inline SimilarityMatrix protein_context_similarity(const std::string& gene,
                                                   const EmbeddingTable& table) {
    const auto pid = table.protein_id(gene);
    std::vector<std::string> labels;
    std::vector<const double*> rows;
    if (pid) {
        for (std::size_t c = 0; c < table.contexts.size(); ++c) {
            const double* z = table.protein_embedding(c, *pid);
            if (!z) continue;
            labels.push_back(table.contexts[c].context_id);
            rows.push_back(z);
        }
    }
    if (rows.size() < 2)
        throw InsufficientContexts("gene '" + gene + "' is active in " +
                                   std::to_string(rows.size()) + " context(s); need >= 2");
    Matrix sim(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sim.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            const double c = cosine(rows[i], rows[j], table.dim);
            sim.at(i, j) = c;
            sim.at(j, i) = c;
        }
    }
    return detail::ordered_similarity(labels, sim);
}

// Cosine similarity over all metagraph nodes (subtypes and cell types).
inline SimilarityMatrix cell_similarity(const EmbeddingTable& table) {
    const std::size_t n = table.cell_labels.size();
    if (n < 2) throw InsufficientContexts("cell_similarity: need >= 2 cell nodes");
    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sim.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c =
                cosine(table.cell_embeddings.row(i), table.cell_embeddings.row(j), table.dim);
            sim.at(i, j) = c;
            sim.at(j, i) = c;
        }
    }
    return detail::ordered_similarity(table.cell_labels, sim);
}

struct MarkerScore {
    std::string gene;
    double contrast = 0.0;
};

// contrast(g, c) = cos(z_g^c, centroid of context c) minus the mean cosine of
// z_g^c with the gene's embeddings in its other contexts. High values flag
// genes whose role is specific to that context. Genes active in fewer than
// two contexts are skipped.
inline std::vector<std::pair<std::string, std::vector<MarkerScore>>> marker_contrast(
    const EmbeddingTable& table) {
    // Context centroids.
    std::vector<std::vector<double>> centroid(table.contexts.size(),
                                              std::vector<double>(table.dim, 0.0));
    for (std::size_t c = 0; c < table.contexts.size(); ++c) {
        const auto& blk = table.contexts[c];
        for (std::size_t r = 0; r < blk.embeddings.rows; ++r)
            for (std::size_t k = 0; k < table.dim; ++k)
                centroid[c][k] += blk.embeddings.at(r, k);
        for (auto& v : centroid[c]) v /= static_cast<double>(blk.embeddings.rows);
    }

    // Gene -> (context, row) occurrences.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> occurrences(
        table.protein_names.size());
    for (std::size_t c = 0; c < table.contexts.size(); ++c) {
        const auto& blk = table.contexts[c];
        for (std::size_t r = 0; r < blk.protein_ids.size(); ++r)
            occurrences[blk.protein_ids[r]].push_back({c, r});
    }

    std::vector<std::pair<std::string, std::vector<MarkerScore>>> out;
    for (const auto& blk : table.contexts) out.push_back({blk.context_id, {}});
    for (std::uint32_t pid = 0; pid < occurrences.size(); ++pid) {
        const auto& occ = occurrences[pid];
        if (occ.size() < 2) continue;
        for (const auto& [c, r] : occ) {
            const double* z = table.contexts[c].embeddings.row(r);
            double cross = 0.0;
            for (const auto& [c2, r2] : occ) {
                if (c2 == c) continue;
                cross += cosine(z, table.contexts[c2].embeddings.row(r2), table.dim);
            }
            cross /= static_cast<double>(occ.size() - 1);
            const double within = cosine(z, centroid[c].data(), table.dim);
            out[c].second.push_back({table.protein_names[pid], within - cross});
        }
    }
    for (auto& [ctx_id, scores] : out)
        std::sort(scores.begin(), scores.end(), [](const MarkerScore& a, const MarkerScore& b) {
            if (a.contrast != b.contrast) return a.contrast > b.contrast;
            return a.gene < b.gene;
        });
    return out;
}

// Strict per-context win percentages for the eight ranking metrics, Table-2
// shaped. Ties and missing values count as non-wins; every context counts
// toward the total.
struct ComparisonReport {
    struct Row {
        std::string metric;
        std::size_t wins = 0;
        std::size_t total = 0;
        double percent = 0.0;  // 100 * wins / total, rounded to 2 decimals
    };
    std::vector<Row> rows;
};

inline double win_percentage(std::size_t wins, std::size_t total) {
    if (total == 0) throw ContractViolation("win_percentage: empty context set");
    return std::round(10000.0 * static_cast<double>(wins) / static_cast<double>(total)) / 100.0;
}

inline ComparisonReport compare_models(
    const std::vector<std::pair<std::string, RankingMetrics>>& model,
    const std::vector<std::pair<std::string, RankingMetrics>>& baseline) {
    if (model.size() != baseline.size())
        throw ContractViolation("compare_models: context lists differ in size");
    for (std::size_t i = 0; i < model.size(); ++i)
        if (model[i].first != baseline[i].first)
            throw ContractViolation("compare_models: context mismatch at index " +
                                    std::to_string(i) + ": '" + model[i].first + "' vs '" +
                                    baseline[i].first + "'");

    using Getter = std::optional<double> (*)(const RankingMetrics&);
    static const std::vector<std::pair<std::string, Getter>> metrics = {
        {"AP@5", [](const RankingMetrics& m) { return m.ap5; }},
        {"AP@10", [](const RankingMetrics& m) { return m.ap10; }},
        {"AUPRC", [](const RankingMetrics& m) { return m.auprc; }},
        {"AUROC", [](const RankingMetrics& m) { return m.auroc; }},
        {"Precision@5", [](const RankingMetrics& m) { return m.p5; }},
        {"Precision@10", [](const RankingMetrics& m) { return m.p10; }},
        {"Recall@5", [](const RankingMetrics& m) { return m.r5; }},
        {"Recall@10", [](const RankingMetrics& m) { return m.r10; }},
    };

    ComparisonReport report;
    for (const auto& [name, get] : metrics) {
        ComparisonReport::Row row;
        row.metric = name;
        row.total = model.size();
        for (std::size_t i = 0; i < model.size(); ++i) {
            const auto mv = get(model[i].second);
            const auto bv = get(baseline[i].second);
            if (mv && bv && *mv > *bv) ++row.wins;
        }
        row.percent = win_percentage(row.wins, row.total);
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace ctxppi
