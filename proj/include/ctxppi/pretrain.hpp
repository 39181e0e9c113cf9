#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ctxppi/autodiff.hpp"
#include "ctxppi/errors.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/metrics.hpp"
#include "ctxppi/model.hpp"
#include "ctxppi/optim.hpp"
#include "ctxppi/rng.hpp"

namespace ctxppi {

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;

    void validate() const {
        if (std::abs(train + valid + test - 1.0) > 1e-9)
            throw ContractViolation("split ratios must sum to 1");
        if (train < 0 || valid < 0 || test < 0)
            throw ContractViolation("split ratios must be nonnegative");
    }
};

// Per-context edge partition for link prediction. Metagraph edges are never
// split. Validation/test negatives are sampled once; training negatives are
// resampled every epoch by the trainer.
struct EdgeSplit {
    struct ContextSplit {
        std::string context_id;
        std::vector<Edge> train_pos, valid_pos, test_pos;
        std::vector<Edge> valid_neg, test_neg;
        bool all_to_train = false;  // fewer than 10 edges
    };
    std::vector<ContextSplit> contexts;
    std::uint64_t seed = 0;
};

struct SplitCounts {
    std::size_t train = 0, valid = 0, test = 0;
};

// Floor allocation for valid/test, remainder to train.
inline SplitCounts split_counts(std::size_t n, const SplitRatios& r) {
    SplitCounts c;
    c.valid = static_cast<std::size_t>(std::floor(r.valid * static_cast<double>(n)));
    c.test = static_cast<std::size_t>(std::floor(r.test * static_cast<double>(n)));
    c.train = n - c.valid - c.test;
    return c;
}

// Shuffle-and-cut of one context's edges. Contexts with fewer than 10 edges
// put everything into train.
inline void split_context_edges(const std::vector<Edge>& edges, const SplitRatios& ratios,
                                Rng& rng, EdgeSplit::ContextSplit& out) {
    std::vector<Edge> shuffled = edges;
    rng.shuffle(shuffled);
    if (edges.size() < 10) {
        out.train_pos = std::move(shuffled);
        out.all_to_train = true;
        return;
    }
    const SplitCounts c = split_counts(edges.size(), ratios);
    out.train_pos.assign(shuffled.begin(), shuffled.begin() + c.train);
    out.valid_pos.assign(shuffled.begin() + c.train, shuffled.begin() + c.train + c.valid);
    out.test_pos.assign(shuffled.begin() + c.train + c.valid, shuffled.end());
}

// Uniform non-edges of the context graph: no true edges, no self-loops, no
// duplicates. Gives up once the retry budget is spent (dense graphs).
inline std::vector<Edge> sample_negatives(const ContextGraph& ctx,
                                          const std::vector<Edge>& positives, double ratio,
                                          Rng& rng) {
    const std::size_t n = ctx.n_nodes();
    const std::size_t want =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(positives.size())));
    if (want == 0) return {};
    if (n < 2) throw SamplingExhausted("context '" + ctx.context_id + "' has < 2 nodes");

    std::unordered_set<std::uint64_t> forbidden;
    forbidden.reserve(ctx.edges.size() + want);
    for (const auto& e : ctx.edges) forbidden.insert(edge_key(e));

    std::vector<Edge> out;
    out.reserve(want);
    std::size_t budget = want * 200 + 1000;
    while (out.size() < want) {
        if (budget-- == 0)
            throw SamplingExhausted("context '" + ctx.context_id + "': could not find " +
                                    std::to_string(want) + " non-edges (graph too dense)");
        const auto a = static_cast<std::uint32_t>(rng.below(n));
        const auto b = static_cast<std::uint32_t>(rng.below(n));
        if (a == b) continue;
        const Edge e = make_edge(a, b);
        if (!forbidden.insert(edge_key(e)).second) continue;
        out.push_back(e);
    }
    return out;
}

inline EdgeSplit split_edges(const KnowledgeGraph& kg, const SplitRatios& ratios,
                             std::uint64_t seed, double negative_ratio = 1.0) {
    ratios.validate();
    EdgeSplit split;
    split.seed = seed;
    const Rng base(seed);
    for (const auto& ctx : kg.contexts) {
        EdgeSplit::ContextSplit cs;
        cs.context_id = ctx.context_id;
        Rng rng = base.fork("split:" + ctx.context_id);
        split_context_edges(ctx.edges, ratios, rng, cs);
        Rng vrng = base.fork("neg:valid:" + ctx.context_id);
        cs.valid_neg = sample_negatives(ctx, cs.valid_pos, negative_ratio, vrng);
        Rng trng = base.fork("neg:test:" + ctx.context_id);
        cs.test_neg = sample_negatives(ctx, cs.test_pos, negative_ratio, trng);
        split.contexts.push_back(std::move(cs));
    }
    return split;
}

// ---- loss -------------------------------------------------------------------

// (context block index, local protein row, subtype node index, label)
struct MembershipExample {
    std::uint32_t ctx = 0;
    std::uint32_t row = 0;
    std::uint32_t subtype = 0;
    int label = 0;
};

struct LabeledContextEdge {
    std::uint32_t ctx = 0;
    Edge edge;
    int label = 0;
};

// Mean BCE over PPI edge predictions plus mean BCE over protein-subtype
// membership predictions, summed with equal weight. PPI pairs score as
// sigmoid(z_u . z_v); membership pairs as sigmoid((z_p W_m) . z_cell), where
// W_m is the model's membership projection — it keeps the subtype-alignment
// objective from collapsing the protein-protein geometry. Passing no
// projection scores membership with the raw dot product.
inline double pretrain_loss(const EmbeddingTable& table,
                            const std::vector<LabeledContextEdge>& edges,
                            const std::vector<MembershipExample>& memberships = {},
                            const Matrix* membership_proj = nullptr) {
    auto bce = [](double p, int label) {
        const double eps = 1e-300;
        return label ? -std::log(std::max(p, eps)) : -std::log(std::max(1.0 - p, eps));
    };
    double total = 0.0;
    if (!edges.empty()) {
        double s = 0.0;
        for (const auto& e : edges) {
            const auto& blk = table.contexts.at(e.ctx);
            if (e.edge.first >= blk.embeddings.rows || e.edge.second >= blk.embeddings.rows)
                throw ContractViolation("pretrain_loss: edge endpoint has no embedding");
            s += bce(edge_score(blk.embeddings.row(e.edge.first),
                                blk.embeddings.row(e.edge.second), table.dim),
                     e.label);
        }
        total += s / static_cast<double>(edges.size());
    }
    if (!memberships.empty()) {
        if (membership_proj &&
            (membership_proj->rows != table.dim || membership_proj->cols != table.dim))
            throw ShapeError("pretrain_loss: membership projection must be " +
                             std::to_string(table.dim) + "x" + std::to_string(table.dim));
        double s = 0.0;
        std::vector<double> projected(table.dim);
        for (const auto& m : memberships) {
            const auto& blk = table.contexts.at(m.ctx);
            if (m.row >= blk.embeddings.rows)
                throw ContractViolation("pretrain_loss: membership row has no embedding");
            const double* z = blk.embeddings.row(m.row);
            if (membership_proj) {
                for (std::size_t k = 0; k < table.dim; ++k) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < table.dim; ++i)
                        acc += z[i] * membership_proj->at(i, k);
                    projected[k] = acc;
                }
                z = projected.data();
            }
            s += bce(edge_score(z, table.cell_embeddings.row(m.subtype), table.dim), m.label);
        }
        total += s / static_cast<double>(memberships.size());
    }
    return total;
}

// ---- evaluation ---------------------------------------------------------------

inline std::vector<std::pair<std::string, BinaryMetrics>> eval_link_prediction(
    const EmbeddingTable& table, const EdgeSplit& split, bool use_test) {
    std::vector<std::pair<std::string, BinaryMetrics>> out;
    for (std::size_t c = 0; c < split.contexts.size(); ++c) {
        const auto& cs = split.contexts[c];
        const auto& blk = table.contexts.at(c);
        if (blk.context_id != cs.context_id)
            throw ContractViolation("eval_link_prediction: context order mismatch");
        const auto& pos = use_test ? cs.test_pos : cs.valid_pos;
        const auto& neg = use_test ? cs.test_neg : cs.valid_neg;
        std::vector<double> scores;
        std::vector<int> labels;
        scores.reserve(pos.size() + neg.size());
        for (const auto& e : pos) {
            scores.push_back(
                edge_score(blk.embeddings.row(e.first), blk.embeddings.row(e.second), table.dim));
            labels.push_back(1);
        }
        for (const auto& e : neg) {
            scores.push_back(
                edge_score(blk.embeddings.row(e.first), blk.embeddings.row(e.second), table.dim));
            labels.push_back(0);
        }
        out.push_back({cs.context_id, binary_metrics(scores, labels)});
    }
    return out;
}

// ---- training loop ------------------------------------------------------------

struct PretrainOptions {
    ModelConfig model;
    std::size_t epochs = 100;
    double learning_rate = 3e-2;
    SplitRatios ratios{};
    double negative_ratio = 1.0;
};

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> val_auroc;  // mean over contexts, after each epoch's update
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;  // 1-based; 0 = never evaluated
    double best_val_auroc = 0.0;
    double wall_clock_sec = 0.0;  // informational; not serialized (see CLI)
    bool aborted_non_finite = false;
    std::vector<std::pair<std::string, BinaryMetrics>> test_metrics;  // at best params
    std::vector<std::string> warnings;
};

struct PretrainResult {
    ModelParams params;       // best-validation parameters (inference)
    ModelParams last_params;  // end-of-training parameters (resume)
    ad::AdamState adam;
    TrainReport report;
    EdgeSplit split;
    Rng rng;  // training stream state, checkpointable

    PretrainResult() : rng(0) {}
};

// Mid-training state restored from a checkpoint; epoch numbering continues
// where the previous run stopped.
struct TrainStart {
    ModelParams params;
    ad::AdamState adam;
    Rng rng;
    std::size_t completed_epochs = 0;
    bool has_best = false;
    ModelParams best_params;
    double best_val = -1.0;
    std::size_t best_epoch = 0;

    TrainStart() : rng(0) {}
};

namespace detail {

// protein id -> flags of contexts it is active in
inline std::vector<std::vector<bool>> activation_flags(const KnowledgeGraph& kg) {
    std::vector<std::vector<bool>> active(kg.global.n_proteins(),
                                          std::vector<bool>(kg.contexts.size(), false));
    for (std::size_t c = 0; c < kg.contexts.size(); ++c)
        for (auto pid : kg.contexts[c].nodes) active[pid][c] = true;
    return active;
}

// One membership positive per activated (context, protein) pair and one
// corrupted-subtype negative where possible.
inline std::vector<MembershipExample> sample_membership_batch(
    const KnowledgeGraph& kg, const std::vector<std::vector<bool>>& active, Rng& rng) {
    std::vector<MembershipExample> out;
    const std::size_t n_ctx = kg.contexts.size();
    if (n_ctx < 2) return out;
    for (std::uint32_t c = 0; c < n_ctx; ++c) {
        const auto& ctx = kg.contexts[c];
        for (std::uint32_t r = 0; r < ctx.nodes.size(); ++r) {
            out.push_back({c, r, c, 1});
            const auto& flags = active[ctx.nodes[r]];
            std::size_t n_inactive = 0;
            for (bool f : flags) n_inactive += f ? 0 : 1;
            if (n_inactive == 0) continue;  // active everywhere, no negative exists
            std::uint32_t neg;
            do {
                neg = static_cast<std::uint32_t>(rng.below(n_ctx));
            } while (flags[neg]);
            out.push_back({c, r, neg, 0});
        }
    }
    return out;
}

}  // namespace detail

// Full-batch self-supervised pretraining. Each epoch: fresh negative edges,
// one Adam step on the combined PPI + membership BCE, then validation AUROC
// with the updated parameters. Keeps the best-validation parameters. All
// per-epoch sampling streams derive from (seed, epoch), so a resumed run
// continues exactly where the checkpointed one stopped.
inline PretrainResult train(const KnowledgeGraph& kg, const PretrainOptions& opt,
                            const TrainStart* start = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    opt.model.validate();
    opt.ratios.validate();
    if (kg.contexts.empty()) throw ContractViolation("train: knowledge graph has no contexts");

    PretrainResult res;
    res.split = split_edges(kg, opt.ratios, opt.model.seed, opt.negative_ratio);
    res.params = start ? start->params : init_params(opt.model, kg);
    res.rng = start ? start->rng : Rng(opt.model.seed).fork("train");
    for (const auto& cs : res.split.contexts)
        if (cs.all_to_train)
            res.report.warnings.push_back("context '" + cs.context_id +
                                          "' has < 10 edges; all edges assigned to train");

    auto named = res.params.named();
    std::vector<Matrix*> param_ptrs;
    for (auto& [name, m] : named) param_ptrs.push_back(m);
    res.adam = start ? start->adam : ad::AdamState::init(param_ptrs, opt.learning_rate);

    const auto active = detail::activation_flags(kg);
    const Rng base(opt.model.seed);

    ModelParams best_params = start && start->has_best ? start->best_params : res.params;
    double best_val = start ? start->best_val : -1.0;
    std::size_t best_epoch = start ? start->best_epoch : 0;
    const std::size_t first_epoch = (start ? start->completed_epochs : 0) + 1;

    for (std::size_t epoch = first_epoch; epoch <= opt.epochs; ++epoch) {
        // Assemble this epoch's batch: all train positives + fresh negatives.
        std::vector<std::uint32_t> edge_src, edge_dst;
        std::vector<int> edge_labels;
        for (std::size_t c = 0; c < kg.contexts.size(); ++c) {
            const auto& cs = res.split.contexts[c];
            Rng nrng = base.fork("neg:train:" + cs.context_id, epoch);
            const auto negs =
                sample_negatives(kg.contexts[c], cs.train_pos, opt.negative_ratio, nrng);
            auto push = [&](const std::vector<Edge>& edges, int label, std::size_t offset) {
                for (const auto& [u, v] : edges) {
                    edge_src.push_back(static_cast<std::uint32_t>(offset + u));
                    edge_dst.push_back(static_cast<std::uint32_t>(offset + v));
                    edge_labels.push_back(label);
                }
            };
            // Row offsets in the stacked forward matrix mirror kg context order.
            std::size_t offset = 0;
            for (std::size_t cc = 0; cc < c; ++cc) offset += kg.contexts[cc].n_nodes();
            push(cs.train_pos, 1, offset);
            push(negs, 0, offset);
        }
        Rng mrng = base.fork("membership", epoch);
        const auto memberships = detail::sample_membership_batch(kg, active, mrng);

        ForwardGraph fw = forward_graph(kg, res.params, opt.model);
        ad::Tape& tape = fw.tape;

        const ad::NodeId ppi_scores = ad::rowwise_dot(
            tape, tape.gather_rows(fw.protein_final, edge_src),
            tape.gather_rows(fw.protein_final, edge_dst), opt.model.latent_dim);
        ad::NodeId loss = ad::bce_loss(tape, ppi_scores, edge_labels);

        if (!memberships.empty()) {
            std::vector<std::uint32_t> prot_rows, cell_rows;
            std::vector<int> m_labels;
            for (const auto& m : memberships) {
                prot_rows.push_back(
                    static_cast<std::uint32_t>(fw.context_row_offset[m.ctx] + m.row));
                cell_rows.push_back(m.subtype);
                m_labels.push_back(m.label);
            }
            ad::NodeId proj_leaf = -1;
            for (const auto& [name, id] : fw.param_leaves)
                if (name == "membership.proj") proj_leaf = id;
            const ad::NodeId projected = tape.matmul(fw.protein_final, proj_leaf);
            const ad::NodeId m_scores = ad::rowwise_dot(
                tape, tape.gather_rows(projected, prot_rows),
                tape.gather_rows(fw.cell_final, cell_rows), opt.model.latent_dim);
            loss = tape.add(loss, ad::bce_loss(tape, m_scores, m_labels));
        }

        const double loss_value = tape.value(loss).data[0];
        if (!std::isfinite(loss_value)) {
            res.report.aborted_non_finite = true;
            res.report.warnings.push_back("non-finite loss at epoch " + std::to_string(epoch) +
                                          "; restored best checkpoint");
            break;
        }
        res.report.epoch_loss.push_back(loss_value);

        tape.backward(loss);
        std::vector<Matrix> grads;
        grads.reserve(fw.param_leaves.size());
        for (const auto& [name, id] : fw.param_leaves) grads.push_back(tape.grad(id));
        std::vector<const Matrix*> grad_ptrs;
        for (const auto& g : grads) grad_ptrs.push_back(&g);
        ad::adam_step(param_ptrs, grad_ptrs, res.adam);
        res.report.epochs_run = epoch;

        if (!res.params.all_finite()) {
            res.report.aborted_non_finite = true;
            res.report.warnings.push_back("non-finite parameters after epoch " +
                                          std::to_string(epoch) + "; restored best checkpoint");
            break;
        }

        // Validation with updated parameters.
        const EmbeddingTable table = forward(kg, res.params, opt.model);
        const auto val = eval_link_prediction(table, res.split, /*use_test=*/false);
        double sum = 0.0;
        std::size_t cnt = 0;
        for (const auto& [ctx_id, m] : val)
            if (m.auroc) {
                sum += *m.auroc;
                ++cnt;
            }
        const double mean_auroc = cnt ? sum / static_cast<double>(cnt) : 0.0;
        res.report.val_auroc.push_back(mean_auroc);
        if (cnt && mean_auroc > best_val) {
            best_val = mean_auroc;
            best_epoch = epoch;
            best_params = res.params;
        }
    }

    res.last_params = res.params;
    if (best_epoch > 0) {
        res.params = best_params;
        res.report.best_epoch = best_epoch;
        res.report.best_val_auroc = best_val;
    }
    if (res.report.epochs_run > 0) {
        const EmbeddingTable table = forward(kg, res.params, opt.model);
        res.report.test_metrics = eval_link_prediction(table, res.split, /*use_test=*/true);
    }
    res.report.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace ctxppi
