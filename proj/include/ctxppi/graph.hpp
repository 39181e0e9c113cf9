#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ctxppi/errors.hpp"
#include "ctxppi/tsv.hpp"

namespace ctxppi {

using Edge = std::pair<std::uint32_t, std::uint32_t>;  // endpoints ordered u < v

inline Edge make_edge(std::uint32_t a, std::uint32_t b) {
    return a < b ? Edge{a, b} : Edge{b, a};
}

inline std::uint64_t edge_key(const Edge& e) {
    return (static_cast<std::uint64_t>(e.first) << 32) | e.second;
}

// Reference interactome. Protein order is lexicographic so downstream results
// do not depend on input row order.
struct GlobalPPI {
    std::vector<std::string> proteins;
    std::unordered_map<std::string, std::uint32_t> index;
    std::vector<Edge> edges;                 // sorted, unique
    std::unordered_set<std::uint64_t> edge_set;

    std::size_t n_proteins() const { return proteins.size(); }
    std::size_t n_edges() const { return edges.size(); }
    bool has_edge(std::uint32_t a, std::uint32_t b) const {
        return edge_set.count(edge_key(make_edge(a, b))) > 0;
    }

    static GlobalPPI from_edges(const std::vector<std::pair<std::string, std::string>>& raw,
                                std::size_t* self_loops_dropped = nullptr) {
        GlobalPPI g;
        std::set<std::string> names;
        for (const auto& [a, b] : raw) {
            names.insert(a);
            names.insert(b);
        }
        g.proteins.assign(names.begin(), names.end());
        for (std::uint32_t i = 0; i < g.proteins.size(); ++i) g.index[g.proteins[i]] = i;
        std::size_t dropped = 0;
        for (const auto& [a, b] : raw) {
            if (a == b) {
                ++dropped;
                continue;
            }
            const Edge e = make_edge(g.index.at(a), g.index.at(b));
            if (g.edge_set.insert(edge_key(e)).second) g.edges.push_back(e);
        }
        std::sort(g.edges.begin(), g.edges.end());
        if (self_loops_dropped) *self_loops_dropped = dropped;
        return g;
    }
};

// Induced subgraph of the global PPI on one cell subtype's activated genes,
// reduced to its largest connected component. Nodes are global protein ids;
// edges use local dense indices 0..n-1 matching the `nodes` order.
struct ContextGraph {
    std::string context_id;
    std::vector<std::uint32_t> nodes;  // sorted global protein ids
    std::vector<Edge> edges;           // local indices, sorted, unique

    std::size_t n_nodes() const { return nodes.size(); }
    std::size_t n_edges() const { return edges.size(); }
};

struct Metagraph {
    std::vector<std::string> subtype_nodes;   // sorted
    std::vector<std::string> celltype_nodes;  // sorted
    std::vector<Edge> subtype_edges;          // indices into subtype_nodes
    std::vector<std::pair<std::uint32_t, std::uint32_t>> hierarchy_edges;  // subtype -> celltype

    std::size_t n_nodes() const { return subtype_nodes.size() + celltype_nodes.size(); }
};

struct DegRecord {
    std::string context_id;
    std::string gene;
    double avg_fc = 0.0;
    double adj_p = 0.0;
    double pct_expressed = 0.0;
};

struct LrRecord {
    std::string source_subtype;
    std::string target_subtype;
    std::string ligand;
    std::string receptor;
    double aggregate_rank = 0.0;
};

struct DataSummary {
    std::size_t n_proteins = 0;
    std::size_t n_edges = 0;
    double global_density = 0.0;
    std::size_t n_subtypes = 0;
    std::size_t n_celltypes = 0;
    std::size_t n_unique_proteins_in_contexts = 0;
    std::size_t total_protein_representations = 0;
    double context_density_min = 0.0;
    double context_density_max = 0.0;
};

struct KnowledgeGraph {
    GlobalPPI global;
    std::vector<ContextGraph> contexts;  // sorted by context_id; contexts[i] is subtype_nodes[i]
    Metagraph metagraph;
};

struct DegThresholds {
    double fc_up = 1.2;
    double fc_down = 0.8;
    double max_adj_p = 0.05;
    double min_pct = 0.05;  // strict: pct must exceed this
};

// FC and p cutoffs are inclusive, the percent-expressed cutoff is strict.
inline std::map<std::string, std::set<std::string>> select_activated_genes(
    const std::vector<DegRecord>& deg_table, const DegThresholds& th = {}) {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& r : deg_table) {
        auto& set = out[r.context_id];
        const bool fc_pass = r.avg_fc >= th.fc_up || r.avg_fc <= th.fc_down;
        if (fc_pass && r.adj_p <= th.max_adj_p && r.pct_expressed > th.min_pct) set.insert(r.gene);
    }
    return out;
}

namespace detail {

// Connected components by BFS over an adjacency list; returns component id per node.
inline std::vector<std::uint32_t> components(std::size_t n,
                                             const std::vector<std::vector<std::uint32_t>>& adj) {
    std::vector<std::uint32_t> comp(n, UINT32_MAX);
    std::vector<std::uint32_t> queue;
    std::uint32_t next = 0;
    for (std::uint32_t s = 0; s < n; ++s) {
        if (comp[s] != UINT32_MAX) continue;
        comp[s] = next;
        queue.assign(1, s);
        while (!queue.empty()) {
            const std::uint32_t u = queue.back();
            queue.pop_back();
            for (std::uint32_t v : adj[u]) {
                if (comp[v] == UINT32_MAX) {
                    comp[v] = next;
                    queue.push_back(v);
                }
            }
        }
        ++next;
    }
    return comp;
}

}  // namespace detail

inline ContextGraph build_context_ppi(const GlobalPPI& global, const std::string& context_id,
                                      const std::set<std::string>& activated,
                                      std::size_t min_nodes,
                                      std::size_t* unknown_dropped = nullptr) {
    std::vector<std::uint32_t> active_ids;
    std::size_t unknown = 0;
    for (const auto& g : activated) {
        auto it = global.index.find(g);
        if (it == global.index.end())
            ++unknown;
        else
            active_ids.push_back(it->second);
    }
    if (unknown_dropped) *unknown_dropped = unknown;
    std::sort(active_ids.begin(), active_ids.end());

    std::unordered_map<std::uint32_t, std::uint32_t> local;
    local.reserve(active_ids.size());
    for (std::uint32_t i = 0; i < active_ids.size(); ++i) local[active_ids[i]] = i;

    // Induce on the activated set.
    std::vector<Edge> induced;
    for (const auto& [a, b] : global.edges) {
        auto ia = local.find(a);
        if (ia == local.end()) continue;
        auto ib = local.find(b);
        if (ib == local.end()) continue;
        induced.push_back(make_edge(ia->second, ib->second));
    }

    // Keep the largest connected component; ties broken by smallest node id.
    std::vector<std::vector<std::uint32_t>> adj(active_ids.size());
    for (const auto& [u, v] : induced) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    const auto comp = detail::components(active_ids.size(), adj);
    std::vector<std::size_t> comp_size;
    for (auto c : comp) {
        if (c >= comp_size.size()) comp_size.resize(c + 1, 0);
        ++comp_size[c];
    }
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < comp_size.size(); ++c)
        if (comp_size[c] > comp_size[best]) best = c;

    const std::size_t lcc_size = comp_size.empty() ? 0 : comp_size[best];
    if (lcc_size < min_nodes) throw ContextRejected(context_id, lcc_size);

    ContextGraph ctx;
    ctx.context_id = context_id;
    std::vector<std::uint32_t> relabel(active_ids.size(), UINT32_MAX);
    for (std::uint32_t i = 0; i < active_ids.size(); ++i) {
        if (comp[i] == best) {
            relabel[i] = static_cast<std::uint32_t>(ctx.nodes.size());
            ctx.nodes.push_back(active_ids[i]);
        }
    }
    for (const auto& [u, v] : induced)
        if (relabel[u] != UINT32_MAX && relabel[v] != UINT32_MAX)
            ctx.edges.push_back(make_edge(relabel[u], relabel[v]));
    std::sort(ctx.edges.begin(), ctx.edges.end());
    return ctx;
}

// Undirected subtype pairs with at least one interaction at or below the rank
// threshold; direction collapsed, self-pairs dropped.
inline std::set<std::pair<std::string, std::string>> select_lr_edges(
    const std::vector<LrRecord>& lr_table, double threshold = 0.05) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& r : lr_table) {
        if (r.aggregate_rank > threshold) continue;
        if (r.source_subtype == r.target_subtype) continue;
        auto pair = std::minmax(r.source_subtype, r.target_subtype);
        out.insert({pair.first, pair.second});
    }
    return out;
}

inline Metagraph assemble_metagraph(
    const std::set<std::pair<std::string, std::string>>& subtype_edges,
    const std::map<std::string, std::string>& hierarchy) {
    Metagraph mg;
    for (const auto& [sub, ct] : hierarchy) mg.subtype_nodes.push_back(sub);
    std::set<std::string> celltypes;
    for (const auto& [sub, ct] : hierarchy) celltypes.insert(ct);
    mg.celltype_nodes.assign(celltypes.begin(), celltypes.end());

    std::unordered_map<std::string, std::uint32_t> sub_idx, ct_idx;
    for (std::uint32_t i = 0; i < mg.subtype_nodes.size(); ++i) sub_idx[mg.subtype_nodes[i]] = i;
    for (std::uint32_t i = 0; i < mg.celltype_nodes.size(); ++i) ct_idx[mg.celltype_nodes[i]] = i;

    for (const auto& [a, b] : subtype_edges) {
        auto ia = sub_idx.find(a);
        auto ib = sub_idx.find(b);
        if (ia == sub_idx.end()) throw MissingParent(a);
        if (ib == sub_idx.end()) throw MissingParent(b);
        if (ia->second == ib->second) continue;
        mg.subtype_edges.push_back(make_edge(ia->second, ib->second));
    }
    std::sort(mg.subtype_edges.begin(), mg.subtype_edges.end());
    mg.subtype_edges.erase(std::unique(mg.subtype_edges.begin(), mg.subtype_edges.end()),
                           mg.subtype_edges.end());

    for (const auto& [sub, ct] : hierarchy)
        mg.hierarchy_edges.push_back({sub_idx.at(sub), ct_idx.at(ct)});
    return mg;
}

inline double graph_density(std::size_t n_nodes, std::size_t n_edges) {
    if (n_nodes < 2)
        throw DegenerateGraph("graph_density: need at least 2 nodes, got " +
                              std::to_string(n_nodes));
    return 2.0 * static_cast<double>(n_edges) /
           (static_cast<double>(n_nodes) * static_cast<double>(n_nodes - 1));
}

inline DataSummary summarize(const KnowledgeGraph& kg) {
    DataSummary s;
    s.n_proteins = kg.global.n_proteins();
    s.n_edges = kg.global.n_edges();
    s.global_density = graph_density(s.n_proteins, s.n_edges);
    s.n_subtypes = kg.metagraph.subtype_nodes.size();
    s.n_celltypes = kg.metagraph.celltype_nodes.size();
    std::unordered_set<std::uint32_t> unique_active;
    bool first = true;
    for (const auto& ctx : kg.contexts) {
        s.total_protein_representations += ctx.n_nodes();
        unique_active.insert(ctx.nodes.begin(), ctx.nodes.end());
        const double d = graph_density(ctx.n_nodes(), ctx.n_edges());
        if (first || d < s.context_density_min) s.context_density_min = d;
        if (first || d > s.context_density_max) s.context_density_max = d;
        first = false;
    }
    s.n_unique_proteins_in_contexts = unique_active.size();
    return s;
}

struct KgWarnings {
    std::size_t self_loops_dropped = 0;
    std::size_t unknown_genes_dropped = 0;
    std::vector<std::string> rejected_contexts;
    std::size_t lr_edges_dropped = 0;
};

// Full construction path: activation map -> context graphs -> metagraph.
// Contexts whose largest component is below min_nodes are dropped with a
// warning; kept contexts must all appear in the hierarchy.
inline KnowledgeGraph build_knowledge_graph(
    GlobalPPI global, const std::map<std::string, std::set<std::string>>& activation,
    const std::set<std::pair<std::string, std::string>>& lr_edges,
    const std::map<std::string, std::string>& hierarchy, std::size_t min_nodes,
    KgWarnings* warnings = nullptr) {
    KnowledgeGraph kg;
    kg.global = std::move(global);
    for (const auto& [ctx_id, genes] : activation) {
        std::size_t unknown = 0;
        try {
            kg.contexts.push_back(build_context_ppi(kg.global, ctx_id, genes, min_nodes, &unknown));
        } catch (const ContextRejected&) {
            if (warnings) warnings->rejected_contexts.push_back(ctx_id);
        }
        if (warnings) warnings->unknown_genes_dropped += unknown;
    }

    std::set<std::string> kept;
    for (const auto& ctx : kg.contexts) kept.insert(ctx.context_id);

    std::map<std::string, std::string> kept_hierarchy;
    for (const auto& id : kept) {
        auto it = hierarchy.find(id);
        if (it == hierarchy.end()) throw MissingParent(id);
        kept_hierarchy[id] = it->second;
    }
    std::set<std::pair<std::string, std::string>> kept_lr;
    for (const auto& e : lr_edges) {
        if (kept.count(e.first) && kept.count(e.second))
            kept_lr.insert(e);
        else if (warnings)
            ++warnings->lr_edges_dropped;
    }
    kg.metagraph = assemble_metagraph(kept_lr, kept_hierarchy);
    return kg;
}

// ---- input file parsers -----------------------------------------------------

inline GlobalPPI load_global_ppi(const std::string& path, std::size_t* self_loops = nullptr) {
    std::vector<std::pair<std::string, std::string>> raw;
    for_each_tsv_line(path, /*allow_comments=*/true, [&](std::size_t row, const std::string& line) {
        const auto cols = split_tab(line);
        if (cols.size() < 2 || cols[0].empty() || cols[1].empty())
            throw ParseError(path + ":" + std::to_string(row) + ": expected protein_a<TAB>protein_b");
        raw.emplace_back(cols[0], cols[1]);
    });
    return GlobalPPI::from_edges(raw, self_loops);
}

inline std::vector<DegRecord> load_deg_table(const std::string& path) {
    std::vector<DegRecord> out;
    bool header_seen = false;
    for_each_tsv_line(path, true, [&](std::size_t row, const std::string& line) {
        const auto cols = split_tab(line);
        if (!header_seen) {
            require_header(cols, {"context", "gene", "avg_fc", "adj_p", "pct_expressed"}, path);
            header_seen = true;
            return;
        }
        if (cols.size() < 5)
            throw ParseError(path + ":" + std::to_string(row) + ": expected 5 columns, got " +
                             std::to_string(cols.size()));
        DegRecord r;
        r.context_id = cols[0];
        r.gene = cols[1];
        r.avg_fc = parse_double(cols[2], path, row);
        r.adj_p = parse_double(cols[3], path, row);
        r.pct_expressed = parse_double(cols[4], path, row);
        if (r.avg_fc <= 0.0)
            throw ParseError(path + ":" + std::to_string(row) + ": avg_fc must be > 0");
        if (r.adj_p < 0.0 || r.adj_p > 1.0)
            throw ParseError(path + ":" + std::to_string(row) + ": adj_p must be in [0,1]");
        if (r.pct_expressed < 0.0 || r.pct_expressed > 1.0)
            throw ParseError(path + ":" + std::to_string(row) + ": pct_expressed must be in [0,1]");
        out.push_back(std::move(r));
    });
    if (!header_seen) throw ParseError(path + ": empty DEG table (missing header)");
    return out;
}

inline std::vector<LrRecord> load_lr_table(const std::string& path) {
    std::vector<LrRecord> out;
    bool header_seen = false;
    for_each_tsv_line(path, true, [&](std::size_t row, const std::string& line) {
        const auto cols = split_tab(line);
        if (!header_seen) {
            require_header(cols, {"source", "target", "ligand", "receptor", "aggregate_rank"},
                           path);
            header_seen = true;
            return;
        }
        if (cols.size() < 5)
            throw ParseError(path + ":" + std::to_string(row) + ": expected 5 columns, got " +
                             std::to_string(cols.size()));
        LrRecord r;
        r.source_subtype = cols[0];
        r.target_subtype = cols[1];
        r.ligand = cols[2];
        r.receptor = cols[3];
        r.aggregate_rank = parse_double(cols[4], path, row);
        if (r.aggregate_rank < 0.0 || r.aggregate_rank > 1.0)
            throw ParseError(path + ":" + std::to_string(row) + ": aggregate_rank must be in [0,1]");
        out.push_back(std::move(r));
    });
    if (!header_seen) throw ParseError(path + ": empty LR table (missing header)");
    return out;
}

inline std::map<std::string, std::string> load_hierarchy(const std::string& path) {
    std::map<std::string, std::string> out;
    for_each_tsv_line(path, true, [&](std::size_t row, const std::string& line) {
        const auto cols = split_tab(line);
        if (cols.size() < 2 || cols[0].empty() || cols[1].empty())
            throw ParseError(path + ":" + std::to_string(row) + ": expected subtype<TAB>celltype");
        auto it = out.find(cols[0]);
        if (it != out.end() && it->second != cols[1])
            throw ParseError(path + ":" + std::to_string(row) + ": subtype '" + cols[0] +
                             "' mapped to two cell types");
        out[cols[0]] = cols[1];
    });
    return out;
}

}  // namespace ctxppi
