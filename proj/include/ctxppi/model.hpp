#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxppi/autodiff.hpp"
#include "ctxppi/errors.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/matrix.hpp"
#include "ctxppi/rng.hpp"

namespace ctxppi {

struct ModelConfig {
    std::size_t latent_dim = 32;
    std::size_t n_protein_layers = 2;
    std::size_t n_attention_heads = 2;
    std::size_t n_metagraph_layers = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (latent_dim < 1 || n_protein_layers < 1 || n_attention_heads < 1 ||
            n_metagraph_layers < 1)
            throw ContractViolation("ModelConfig: all counts must be >= 1");
        if (latent_dim % n_attention_heads != 0)
            throw ContractViolation("ModelConfig: latent_dim " + std::to_string(latent_dim) +
                                    " not divisible by heads " +
                                    std::to_string(n_attention_heads));
    }

    std::size_t head_dim() const { return latent_dim / n_attention_heads; }
};

struct AttentionLayerParams {
    std::vector<Matrix> w;  // per head: d x head_dim
    std::vector<Matrix> a;  // per head: 2*head_dim x 1
};

// All learnable state. Protein-layer weights are shared across contexts;
// context specificity enters through each context's topology and the
// subtype conditioning.
struct ModelParams {
    Matrix protein_input;   // n_global_proteins x d, free learned features
    Matrix subtype_input;   // n_subtypes x d
    Matrix celltype_input;  // n_celltypes x d
    std::vector<AttentionLayerParams> protein_layers;
    Matrix bridge_proj;   // d x d
    Matrix bridge_score;  // d x 1
    Matrix bridge_merge;  // 2d x d
    std::vector<AttentionLayerParams> metagraph_layers;
    Matrix broadcast_w;    // 2d x d
    AttentionLayerParams final_layer;
    Matrix membership_proj;  // d x d; protein->cell decoder subspace

    // Stable name -> matrix enumeration; fixes init draw order, optimizer
    // slot order and checkpoint layout.
    std::vector<std::pair<std::string, Matrix*>> named() {
        std::vector<std::pair<std::string, Matrix*>> out;
        out.push_back({"protein_input", &protein_input});
        out.push_back({"subtype_input", &subtype_input});
        out.push_back({"celltype_input", &celltype_input});
        auto add_layer = [&out](const std::string& prefix, AttentionLayerParams& l) {
            for (std::size_t h = 0; h < l.w.size(); ++h) {
                out.push_back({prefix + ".head" + std::to_string(h) + ".w", &l.w[h]});
                out.push_back({prefix + ".head" + std::to_string(h) + ".a", &l.a[h]});
            }
        };
        for (std::size_t l = 0; l < protein_layers.size(); ++l)
            add_layer("protein_layer" + std::to_string(l), protein_layers[l]);
        out.push_back({"bridge.proj", &bridge_proj});
        out.push_back({"bridge.score", &bridge_score});
        out.push_back({"bridge.merge", &bridge_merge});
        for (std::size_t l = 0; l < metagraph_layers.size(); ++l)
            add_layer("metagraph_layer" + std::to_string(l), metagraph_layers[l]);
        out.push_back({"broadcast.w", &broadcast_w});
        add_layer("final_layer", final_layer);
        out.push_back({"membership.proj", &membership_proj});
        return out;
    }

    std::vector<std::pair<std::string, const Matrix*>> named() const {
        auto mut = const_cast<ModelParams*>(this)->named();
        std::vector<std::pair<std::string, const Matrix*>> out;
        out.reserve(mut.size());
        for (auto& [name, m] : mut) out.push_back({name, m});
        return out;
    }

    bool all_finite() const {
        for (const auto& [name, m] : named())
            if (!m->all_finite()) return false;
        return true;
    }
};

// One embedding per activated (context, protein) pair plus one per metagraph
// node, all in the same latent dimension.
struct EmbeddingTable {
    struct ContextBlock {
        std::string context_id;
        std::vector<std::uint32_t> protein_ids;  // sorted global ids
        Matrix embeddings;                       // n x dim
    };

    std::size_t dim = 0;
    std::vector<std::string> protein_names;  // global id -> name, sorted
    std::vector<ContextBlock> contexts;
    std::vector<std::string> cell_labels;  // subtypes then celltypes
    Matrix cell_embeddings;
    std::size_t n_subtypes = 0;

    std::size_t n_protein_entries() const {
        std::size_t n = 0;
        for (const auto& c : contexts) n += c.protein_ids.size();
        return n;
    }

    // nullptr when the protein is not activated in that context.
    const double* protein_embedding(std::size_t ctx_index, std::uint32_t protein_id) const {
        const auto& blk = contexts.at(ctx_index);
        const auto it = std::lower_bound(blk.protein_ids.begin(), blk.protein_ids.end(), protein_id);
        if (it == blk.protein_ids.end() || *it != protein_id) return nullptr;
        return blk.embeddings.row(static_cast<std::size_t>(it - blk.protein_ids.begin()));
    }

    std::optional<std::uint32_t> protein_id(const std::string& name) const {
        const auto it = std::lower_bound(protein_names.begin(), protein_names.end(), name);
        if (it == protein_names.end() || *it != name) return std::nullopt;
        return static_cast<std::uint32_t>(it - protein_names.begin());
    }

    const double* cell_embedding(std::size_t node_index) const {
        return cell_embeddings.row(node_index);
    }
};

inline ModelParams init_params(const ModelConfig& config, const KnowledgeGraph& kg) {
    config.validate();
    const std::size_t d = config.latent_dim;
    const std::size_t hd = config.head_dim();
    ModelParams p;
    p.protein_input = Matrix(kg.global.n_proteins(), d);
    p.subtype_input = Matrix(kg.metagraph.subtype_nodes.size(), d);
    p.celltype_input = Matrix(kg.metagraph.celltype_nodes.size(), d);
    auto make_layer = [&](AttentionLayerParams& l) {
        l.w.assign(config.n_attention_heads, Matrix(d, hd));
        l.a.assign(config.n_attention_heads, Matrix(2 * hd, 1));
    };
    p.protein_layers.resize(config.n_protein_layers);
    for (auto& l : p.protein_layers) make_layer(l);
    p.bridge_proj = Matrix(d, d);
    p.bridge_score = Matrix(d, 1);
    p.bridge_merge = Matrix(2 * d, d);
    p.metagraph_layers.resize(config.n_metagraph_layers);
    for (auto& l : p.metagraph_layers) make_layer(l);
    p.broadcast_w = Matrix(2 * d, d);
    make_layer(p.final_layer);
    p.membership_proj = Matrix(d, d);

    // Weight matrices use the Xavier bound over their own shape. The free
    // input embeddings are rows of features, not linear maps: their bound
    // treats each row as a fan-in-1 unit so row norms start near 1 instead of
    // shrinking with the table height.
    Rng rng = Rng(config.seed).fork("init_params");
    const double row_limit = std::sqrt(6.0 / static_cast<double>(1 + d));
    for (auto& [name, m] : p.named()) {
        const bool is_input_table = m == &p.protein_input || m == &p.subtype_input ||
                                    m == &p.celltype_input;
        *m = is_input_table ? Matrix::uniform(m->rows, m->cols, row_limit, rng)
                            : Matrix::xavier_uniform(m->rows, m->cols, rng);
    }
    return p;
}

// Collected attention weights per softmax stage, for invariant checks.
struct AttentionProbe {
    struct SoftmaxRecord {
        std::string stage;
        std::vector<double> weights;
        std::vector<std::uint32_t> segments;
    };
    std::vector<SoftmaxRecord> records;
};

namespace gnn {

constexpr double kLeakySlope = 0.2;

// Directed message-passing edge list with self-loops, sorted by destination
// so softmax segments are contiguous.
struct DirectedEdges {
    std::vector<std::uint32_t> src;
    std::vector<std::uint32_t> dst;
    std::size_t n_nodes = 0;

    static DirectedEdges from_undirected(const std::vector<Edge>& edges, std::size_t n_nodes) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (dst, src)
        pairs.reserve(edges.size() * 2 + n_nodes);
        for (const auto& [u, v] : edges) {
            pairs.push_back({v, u});
            pairs.push_back({u, v});
        }
        for (std::uint32_t i = 0; i < n_nodes; ++i) pairs.push_back({i, i});
        std::sort(pairs.begin(), pairs.end());
        DirectedEdges de;
        de.n_nodes = n_nodes;
        de.src.reserve(pairs.size());
        de.dst.reserve(pairs.size());
        for (const auto& [d, s] : pairs) {
            de.dst.push_back(d);
            de.src.push_back(s);
        }
        return de;
    }
};

struct LayerLeafIds {
    std::vector<ad::NodeId> w;
    std::vector<ad::NodeId> a;
};

// Multi-head graph attention over a directed edge list. Per edge (j -> i) the
// raw score is leaky_relu(a^T [W h_i || W h_j]); weights are softmax-normalized
// over each destination's in-neighborhood; head outputs are concatenated.
inline ad::NodeId attention_layer(ad::Tape& tape, ad::NodeId h, const DirectedEdges& de,
                                  const LayerLeafIds& layer, bool activate,
                                  const std::string& stage, AttentionProbe* probe = nullptr) {
    ad::NodeId out = -1;
    for (std::size_t head = 0; head < layer.w.size(); ++head) {
        const ad::NodeId hw = tape.matmul(h, layer.w[head]);
        const ad::NodeId h_src = tape.gather_rows(hw, de.src);
        const ad::NodeId h_dst = tape.gather_rows(hw, de.dst);
        const ad::NodeId cat = tape.rowwise_concat(h_dst, h_src);
        const ad::NodeId score = tape.leaky_relu(tape.matmul(cat, layer.a[head]), kLeakySlope);
        const ad::NodeId alpha = tape.segment_softmax(score, de.dst);
        if (probe)
            probe->records.push_back(
                {stage + ".head" + std::to_string(head), tape.value(alpha).data, de.dst});
        const ad::NodeId weighted = tape.row_scale(h_src, alpha);
        const ad::NodeId agg = tape.scatter_add_rows(weighted, de.dst, de.n_nodes);
        out = head == 0 ? agg : tape.rowwise_concat(out, agg);
    }
    return activate ? tape.leaky_relu(out, kLeakySlope) : out;
}

// Attention-pool protein rows into one message per segment (cell subtype).
// Rows must be grouped by segment. Returns an n_segments x d matrix.
inline ad::NodeId bridge_pool(ad::Tape& tape, ad::NodeId h,
                              const std::vector<std::uint32_t>& segments,
                              std::size_t n_segments, ad::NodeId proj, ad::NodeId score_vec,
                              AttentionProbe* probe = nullptr) {
    const ad::NodeId projected = tape.matmul(h, proj);
    const ad::NodeId scores = tape.matmul(projected, score_vec);
    const ad::NodeId alpha = tape.segment_softmax(scores, segments);
    if (probe) probe->records.push_back({"bridge", tape.value(alpha).data, segments});
    const ad::NodeId weighted = tape.row_scale(projected, alpha);
    return tape.scatter_add_rows(weighted, segments, n_segments);
}

// Condition each protein row on its own subtype's cell embedding:
// activation(W [h_protein || h_subtype]).
inline ad::NodeId broadcast_cell_to_protein(ad::Tape& tape, ad::NodeId h, ad::NodeId cell,
                                            const std::vector<std::uint32_t>& subtype_of_row,
                                            ad::NodeId w) {
    const ad::NodeId own_cell = tape.gather_rows(cell, subtype_of_row);
    const ad::NodeId cat = tape.rowwise_concat(h, own_cell);
    return tape.leaky_relu(tape.matmul(cat, w), kLeakySlope);
}

}  // namespace gnn

// Tape ids of everything the trainer needs to attach losses and read results.
struct ForwardGraph {
    ad::Tape tape;
    std::vector<std::pair<std::string, ad::NodeId>> param_leaves;  // aligned with params.named()
    ad::NodeId protein_final = -1;  // stacked per-context rows, contexts in kg order
    ad::NodeId cell_final = -1;     // subtype rows then celltype rows
    std::vector<std::size_t> context_row_offset;  // per context, start row in protein_final
    std::size_t total_protein_rows = 0;
};

namespace detail {

inline void check_stage_finite(const ad::Tape& tape, ad::NodeId id, const std::string& stage) {
    if (!tape.value(id).all_finite())
        throw NumericalError("forward: non-finite values after stage '" + stage + "'");
}

}  // namespace detail

// Full pipeline: protein attention layers within each context -> attention
// bridge into subtype nodes -> metagraph propagation -> conditioning broadcast
// back -> final protein layer. Contexts are batched into one stacked matrix;
// no edges cross context boundaries.
inline ForwardGraph forward_graph(const KnowledgeGraph& kg, const ModelParams& params,
                                  const ModelConfig& config, AttentionProbe* probe = nullptr) {
    config.validate();
    ForwardGraph fw;
    ad::Tape& tape = fw.tape;

    for (const auto& [name, m] : params.named())
        fw.param_leaves.push_back({name, tape.leaf(*m, /*trainable=*/true)});
    auto leaf_of = [&fw](const std::string& name) {
        for (const auto& [n, id] : fw.param_leaves)
            if (n == name) return id;
        throw ContractViolation("forward: unknown parameter '" + name + "'");
    };

    // Stack all context node lists; record offsets and per-row context index.
    std::vector<std::uint32_t> all_protein_ids;
    std::vector<std::uint32_t> row_context;
    std::vector<Edge> merged_edges;
    for (std::size_t c = 0; c < kg.contexts.size(); ++c) {
        const auto& ctx = kg.contexts[c];
        const auto offset = static_cast<std::uint32_t>(all_protein_ids.size());
        fw.context_row_offset.push_back(offset);
        for (auto pid : ctx.nodes) {
            all_protein_ids.push_back(pid);
            row_context.push_back(static_cast<std::uint32_t>(c));
        }
        for (const auto& [u, v] : ctx.edges) merged_edges.push_back({u + offset, v + offset});
    }
    fw.total_protein_rows = all_protein_ids.size();
    const auto de = gnn::DirectedEdges::from_undirected(merged_edges, fw.total_protein_rows);

    auto layer_leaves = [&](const std::string& prefix, std::size_t heads) {
        gnn::LayerLeafIds ids;
        for (std::size_t h = 0; h < heads; ++h) {
            ids.w.push_back(leaf_of(prefix + ".head" + std::to_string(h) + ".w"));
            ids.a.push_back(leaf_of(prefix + ".head" + std::to_string(h) + ".a"));
        }
        return ids;
    };

    ad::NodeId h = tape.gather_rows(leaf_of("protein_input"), all_protein_ids);
    for (std::size_t l = 0; l < config.n_protein_layers; ++l) {
        const std::string stage = "protein_layer_" + std::to_string(l);
        h = gnn::attention_layer(tape, h, de, layer_leaves("protein_layer" + std::to_string(l),
                                                           config.n_attention_heads),
                                 /*activate=*/true, stage, probe);
        detail::check_stage_finite(tape, h, stage);
    }

    const std::size_t n_sub = kg.metagraph.subtype_nodes.size();
    const std::size_t n_ct = kg.metagraph.celltype_nodes.size();
    const ad::NodeId msg = gnn::bridge_pool(tape, h, row_context, n_sub, leaf_of("bridge.proj"),
                                            leaf_of("bridge.score"), probe);
    const ad::NodeId merged = tape.leaky_relu(
        tape.matmul(tape.rowwise_concat(leaf_of("subtype_input"), msg), leaf_of("bridge.merge")),
        gnn::kLeakySlope);
    detail::check_stage_finite(tape, merged, "bridge");

    ad::NodeId cell = tape.stack_rows(merged, leaf_of("celltype_input"));
    std::vector<Edge> mg_edges = kg.metagraph.subtype_edges;
    for (const auto& [sub, ct] : kg.metagraph.hierarchy_edges)
        mg_edges.push_back(make_edge(sub, static_cast<std::uint32_t>(n_sub) + ct));
    const auto mg_de = gnn::DirectedEdges::from_undirected(mg_edges, n_sub + n_ct);
    for (std::size_t l = 0; l < config.n_metagraph_layers; ++l) {
        const std::string stage = "metagraph_layer_" + std::to_string(l);
        cell = gnn::attention_layer(
            tape, cell, mg_de,
            layer_leaves("metagraph_layer" + std::to_string(l), config.n_attention_heads),
            /*activate=*/l + 1 < config.n_metagraph_layers, stage, probe);
        detail::check_stage_finite(tape, cell, stage);
    }
    fw.cell_final = cell;

    const ad::NodeId conditioned =
        gnn::broadcast_cell_to_protein(tape, h, cell, row_context, leaf_of("broadcast.w"));
    detail::check_stage_finite(tape, conditioned, "broadcast");

    fw.protein_final = gnn::attention_layer(tape, conditioned, de,
                                            layer_leaves("final_layer", config.n_attention_heads),
                                            /*activate=*/false, "final_layer", probe);
    detail::check_stage_finite(tape, fw.protein_final, "final_layer");
    return fw;
}

inline EmbeddingTable extract_table(const ForwardGraph& fw, const KnowledgeGraph& kg,
                                    const ModelConfig& config) {
    EmbeddingTable table;
    table.dim = config.latent_dim;
    table.protein_names = kg.global.proteins;
    table.n_subtypes = kg.metagraph.subtype_nodes.size();
    const Matrix& prot = fw.tape.value(fw.protein_final);
    for (std::size_t c = 0; c < kg.contexts.size(); ++c) {
        EmbeddingTable::ContextBlock blk;
        blk.context_id = kg.contexts[c].context_id;
        blk.protein_ids = kg.contexts[c].nodes;
        blk.embeddings = Matrix(blk.protein_ids.size(), table.dim);
        const std::size_t off = fw.context_row_offset[c];
        for (std::size_t r = 0; r < blk.protein_ids.size(); ++r)
            std::copy(prot.row(off + r), prot.row(off + r) + table.dim, blk.embeddings.row(r));
        table.contexts.push_back(std::move(blk));
    }
    table.cell_labels = kg.metagraph.subtype_nodes;
    table.cell_labels.insert(table.cell_labels.end(), kg.metagraph.celltype_nodes.begin(),
                             kg.metagraph.celltype_nodes.end());
    table.cell_embeddings = fw.tape.value(fw.cell_final);
    return table;
}

inline EmbeddingTable forward(const KnowledgeGraph& kg, const ModelParams& params,
                              const ModelConfig& config, AttentionProbe* probe = nullptr) {
    const ForwardGraph fw = forward_graph(kg, params, config, probe);
    return extract_table(fw, kg, config);
}

inline double edge_score(const double* zu, const double* zv, std::size_t dim) {
    const double d = dot(zu, zv, dim);
    if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
    const double e = std::exp(d);
    return e / (1.0 + e);
}

}  // namespace ctxppi
