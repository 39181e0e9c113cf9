#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctxppi/autodiff.hpp"
#include "ctxppi/errors.hpp"
#include "ctxppi/metrics.hpp"
#include "ctxppi/model.hpp"
#include "ctxppi/optim.hpp"
#include "ctxppi/rng.hpp"
#include "ctxppi/tsv.hpp"

namespace ctxppi {

struct RiskLabelSet {
    std::set<std::string> positives;
    std::set<std::string> negatives;

    void validate() const {
        if (positives.empty() || negatives.empty())
            throw ContractViolation("risk labels: both classes must be nonempty");
        for (const auto& g : positives)
            if (negatives.count(g))
                throw ContractViolation("risk labels: gene '" + g + "' labeled both 1 and 0");
    }
};

// TSV: gene<TAB>label with label in {1,0}.
inline RiskLabelSet load_risk_labels(const std::string& path) {
    RiskLabelSet labels;
    for_each_tsv_line(path, true, [&](std::size_t row, const std::string& line) {
        const auto cols = split_tab(line);
        if (cols.size() < 2 || cols[0].empty())
            throw ParseError(path + ":" + std::to_string(row) + ": expected gene<TAB>label");
        if (cols[1] == "1")
            labels.positives.insert(cols[0]);
        else if (cols[1] == "0")
            labels.negatives.insert(cols[0]);
        else
            throw ParseError(path + ":" + std::to_string(row) + ": label must be 1 or 0, got '" +
                             cols[1] + "'");
    });
    labels.validate();
    return labels;
}

inline void save_risk_labels(const RiskLabelSet& labels, const std::string& path) {
    std::string body;
    std::map<std::string, int> ordered;
    for (const auto& g : labels.positives) ordered[g] = 1;
    for (const auto& g : labels.negatives) ordered[g] = 0;
    for (const auto& [g, l] : ordered) body += g + "\t" + std::to_string(l) + "\n";
    write_text_file(path, body);
}

// One example per (context, labeled gene embedded in that context). Example
// order is (gene asc, context order) so downstream splits are deterministic.
struct FinetuneDataset {
    std::size_t dim = 0;
    std::vector<std::string> genes;        // per example
    std::vector<std::string> context_ids;  // per example
    Matrix features;                       // n_examples x dim, frozen embeddings
    std::vector<int> labels;
    std::size_t missing_genes = 0;  // labeled genes with no embedding anywhere

    std::size_t size() const { return genes.size(); }
};

inline FinetuneDataset build_finetune_dataset(const EmbeddingTable& table,
                                              const RiskLabelSet& labels) {
    labels.validate();
    FinetuneDataset ds;
    ds.dim = table.dim;
    std::vector<std::pair<std::string, int>> all_labels;
    for (const auto& g : labels.positives) all_labels.push_back({g, 1});
    for (const auto& g : labels.negatives) all_labels.push_back({g, 0});
    std::sort(all_labels.begin(), all_labels.end());

    std::vector<std::vector<double>> rows;
    for (const auto& [gene, label] : all_labels) {
        const auto pid = table.protein_id(gene);
        bool found = false;
        if (pid) {
            for (std::size_t c = 0; c < table.contexts.size(); ++c) {
                const double* z = table.protein_embedding(c, *pid);
                if (!z) continue;
                found = true;
                ds.genes.push_back(gene);
                ds.context_ids.push_back(table.contexts[c].context_id);
                ds.labels.push_back(label);
                rows.emplace_back(z, z + table.dim);
            }
        }
        if (!found) ++ds.missing_genes;
    }
    if (rows.empty()) throw EmptyDataset("no labeled gene has an embedding in any context");
    ds.features = Matrix(rows.size(), ds.dim);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), ds.features.row(i));
    return ds;
}

// One hidden layer, leaky-relu, sigmoid output.
struct MlpParams {
    Matrix w1;  // dim x hidden
    Matrix b1;  // 1 x hidden
    Matrix w2;  // hidden x 1
    Matrix b2;  // 1 x 1

    std::vector<std::pair<std::string, Matrix*>> named() {
        return {{"mlp.w1", &w1}, {"mlp.b1", &b1}, {"mlp.w2", &w2}, {"mlp.b2", &b2}};
    }

    double score(const double* x, std::size_t dim) const {
        double logit = b2.data[0];
        for (std::size_t h = 0; h < w1.cols; ++h) {
            double a = b1.data[h];
            for (std::size_t i = 0; i < dim; ++i) a += x[i] * w1.at(i, h);
            a = a > 0.0 ? a : 0.2 * a;
            logit += a * w2.data[h];
        }
        if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
        const double e = std::exp(logit);
        return e / (1.0 + e);
    }
};

struct MlpOptions {
    std::size_t hidden = 32;
    std::size_t epochs = 300;
    double learning_rate = 1e-2;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct FinetuneResult {
    MlpParams params;
    std::vector<std::string> train_genes;  // gene-level split, stratified by label
    std::vector<std::string> test_genes;
    std::vector<double> epoch_loss;
};

namespace detail {

inline ad::NodeId mlp_logits(ad::Tape& tape, ad::NodeId x, std::size_t n_rows,
                             const std::vector<ad::NodeId>& leaves) {
    const ad::NodeId ones = tape.leaf(Matrix(n_rows, 1, 1.0));
    const ad::NodeId h1 = tape.leaky_relu(
        tape.add(tape.matmul(x, leaves[0]), tape.matmul(ones, leaves[1])), 0.2);
    return tape.add(tape.matmul(h1, leaves[2]), tape.matmul(ones, leaves[3]));
}

}  // namespace detail

// Adam on BCE over all examples of the train-side genes, embeddings frozen.
// The split is by gene, stratified by label, so no gene contributes examples
// to both sides.
inline FinetuneResult train_mlp(const FinetuneDataset& ds, const MlpOptions& opt) {
    if (ds.size() == 0) throw EmptyDataset("train_mlp: empty dataset");
    bool has_pos = false, has_neg = false;
    for (int l : ds.labels) (l ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw ContractViolation("train_mlp: both classes required in the dataset");

    // Unique genes with their labels, split stratified per class.
    std::map<std::string, int> gene_label;
    for (std::size_t i = 0; i < ds.size(); ++i) gene_label[ds.genes[i]] = ds.labels[i];
    std::vector<std::string> pos, neg;
    for (const auto& [g, l] : gene_label) (l ? pos : neg).push_back(g);

    FinetuneResult res;
    Rng rng = Rng(opt.seed).fork("finetune:split");
    auto cut = [&](std::vector<std::string>& genes) {
        rng.shuffle(genes);
        const auto n_test =
            static_cast<std::size_t>(std::floor(opt.test_fraction * static_cast<double>(genes.size())));
        for (std::size_t i = 0; i < genes.size(); ++i)
            (i < n_test ? res.test_genes : res.train_genes).push_back(genes[i]);
    };
    cut(pos);
    cut(neg);
    std::sort(res.train_genes.begin(), res.train_genes.end());
    std::sort(res.test_genes.begin(), res.test_genes.end());

    std::set<std::string> train_set(res.train_genes.begin(), res.train_genes.end());
    std::vector<std::size_t> train_rows;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (train_set.count(ds.genes[i])) train_rows.push_back(i);
    if (train_rows.empty()) throw ContractViolation("train_mlp: empty training side");

    Matrix x(train_rows.size(), ds.dim);
    std::vector<int> y;
    for (std::size_t r = 0; r < train_rows.size(); ++r) {
        std::copy(ds.features.row(train_rows[r]), ds.features.row(train_rows[r]) + ds.dim,
                  x.row(r));
        y.push_back(ds.labels[train_rows[r]]);
    }

    Rng init_rng = Rng(opt.seed).fork("finetune:init");
    res.params.w1 = Matrix::xavier_uniform(ds.dim, opt.hidden, init_rng);
    res.params.b1 = Matrix(1, opt.hidden);
    res.params.w2 = Matrix::xavier_uniform(opt.hidden, 1, init_rng);
    res.params.b2 = Matrix(1, 1);

    auto named = res.params.named();
    std::vector<Matrix*> param_ptrs;
    for (auto& [name, m] : named) param_ptrs.push_back(m);
    ad::AdamState adam = ad::AdamState::init(param_ptrs, opt.learning_rate);

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        ad::Tape tape;
        const ad::NodeId xin = tape.leaf(x);
        std::vector<ad::NodeId> leaves;
        for (auto* m : param_ptrs) leaves.push_back(tape.leaf(*m, true));
        const ad::NodeId loss =
            ad::bce_loss(tape, detail::mlp_logits(tape, xin, x.rows, leaves), y);
        res.epoch_loss.push_back(tape.value(loss).data[0]);
        tape.backward(loss);
        std::vector<Matrix> grads;
        for (auto id : leaves) grads.push_back(tape.grad(id));
        std::vector<const Matrix*> grad_ptrs;
        for (const auto& g : grads) grad_ptrs.push_back(&g);
        ad::adam_step(param_ptrs, grad_ptrs, adam);
    }
    return res;
}

struct ContextScore {
    std::string gene;
    std::string context_id;
    double score = 0.0;
};

// One score per context in which the gene is active; no cross-context pooling.
inline std::vector<ContextScore> score_gene(const std::string& gene, const EmbeddingTable& table,
                                            const MlpParams& mlp) {
    const auto pid = table.protein_id(gene);
    std::vector<ContextScore> out;
    if (pid) {
        for (std::size_t c = 0; c < table.contexts.size(); ++c) {
            const double* z = table.protein_embedding(c, *pid);
            if (!z) continue;
            out.push_back({gene, table.contexts[c].context_id, mlp.score(z, table.dim)});
        }
    }
    if (out.empty()) throw GeneNotFound(gene);
    return out;
}

// Contexts sorted by descending score; ties broken by context id.
inline std::vector<ContextScore> rank_contexts(const std::string& gene,
                                               const EmbeddingTable& table,
                                               const MlpParams& mlp) {
    auto scores = score_gene(gene, table, mlp);
    std::sort(scores.begin(), scores.end(), [](const ContextScore& a, const ContextScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.context_id < b.context_id;
    });
    return scores;
}

struct GeneScore {
    std::string gene;
    double score = 0.0;
    int label = 0;
};

// Per-context ranking metrics over the supplied gene lists. Contexts with no
// positive gene get all-absent metrics. Genes are ordered by id before
// ranking so score ties resolve deterministically.
inline std::vector<std::pair<std::string, RankingMetrics>> eval_ranking(
    std::vector<std::pair<std::string, std::vector<GeneScore>>> per_context) {
    std::vector<std::pair<std::string, RankingMetrics>> out;
    for (auto& [ctx_id, items] : per_context) {
        std::sort(items.begin(), items.end(),
                  [](const GeneScore& a, const GeneScore& b) { return a.gene < b.gene; });
        std::vector<double> scores;
        std::vector<int> labels;
        bool any_pos = false;
        for (const auto& gs : items) {
            scores.push_back(gs.score);
            labels.push_back(gs.label);
            any_pos = any_pos || gs.label;
        }
        out.push_back({ctx_id, any_pos ? ranking_metrics(scores, labels) : RankingMetrics{}});
    }
    return out;
}

// Test-side per-context evaluation: scores every test gene in every context
// where it is embedded, then ranks within context.
inline std::vector<std::pair<std::string, RankingMetrics>> eval_test_ranking(
    const EmbeddingTable& table, const FinetuneDataset& ds, const FinetuneResult& ft) {
    std::set<std::string> test_set(ft.test_genes.begin(), ft.test_genes.end());
    std::map<std::string, std::vector<GeneScore>> per_ctx;
    for (const auto& blk : table.contexts) per_ctx[blk.context_id];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!test_set.count(ds.genes[i])) continue;
        per_ctx[ds.context_ids[i]].push_back(
            {ds.genes[i], ft.params.score(ds.features.row(i), ds.dim), ds.labels[i]});
    }
    std::vector<std::pair<std::string, std::vector<GeneScore>>> ordered;
    for (const auto& blk : table.contexts)
        ordered.push_back({blk.context_id, per_ctx[blk.context_id]});
    return eval_ranking(std::move(ordered));
}

}  // namespace ctxppi
