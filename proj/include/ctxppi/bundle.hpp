#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxppi/errors.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/tsv.hpp"

namespace ctxppi {

inline nlohmann::json summary_to_json(const DataSummary& s) {
    return {
        {"n_proteins", s.n_proteins},
        {"n_edges", s.n_edges},
        {"global_density", s.global_density},
        {"n_subtypes", s.n_subtypes},
        {"n_celltypes", s.n_celltypes},
        {"n_unique_proteins_in_contexts", s.n_unique_proteins_in_contexts},
        {"total_protein_representations", s.total_protein_representations},
        {"context_density_range", {s.context_density_min, s.context_density_max}},
    };
}

namespace detail {

inline std::string sanitize_filename(const std::string& id) {
    std::string out;
    for (char c : id)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')
                   ? c
                   : '_';
    return out.empty() ? "_" : out;
}

}  // namespace detail

// On-disk knowledge-graph bundle: the construction output consumed by the
// pretrain/finetune/analyze/compare commands.
//
//   global_ppi.tsv       protein_a<TAB>protein_b
//   contexts.tsv         manifest: context_id<TAB>relative filename
//   contexts/<id>.tsv    per-context edge list (protein names)
//   metagraph_edges.tsv  subtype<TAB>subtype
//   hierarchy.tsv        subtype<TAB>celltype
//   summary.json
inline void save_bundle(const KnowledgeGraph& kg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "contexts");

    std::string ppi;
    for (const auto& [a, b] : kg.global.edges)
        ppi += kg.global.proteins[a] + "\t" + kg.global.proteins[b] + "\n";
    write_text_file((fs::path(dir) / "global_ppi.tsv").string(), ppi);

    std::string manifest;
    std::set<std::string> used_names;
    for (const auto& ctx : kg.contexts) {
        std::string base = detail::sanitize_filename(ctx.context_id);
        while (!used_names.insert(base).second) base += "_";
        const std::string rel = "contexts/" + base + ".tsv";
        manifest += ctx.context_id + "\t" + rel + "\n";
        std::string body;
        for (const auto& [u, v] : ctx.edges)
            body += kg.global.proteins[ctx.nodes[u]] + "\t" + kg.global.proteins[ctx.nodes[v]] +
                    "\n";
        write_text_file((fs::path(dir) / rel).string(), body);
    }
    write_text_file((fs::path(dir) / "contexts.tsv").string(), manifest);

    std::string mg;
    for (const auto& [a, b] : kg.metagraph.subtype_edges)
        mg += kg.metagraph.subtype_nodes[a] + "\t" + kg.metagraph.subtype_nodes[b] + "\n";
    write_text_file((fs::path(dir) / "metagraph_edges.tsv").string(), mg);

    std::string hier;
    for (const auto& [sub, ct] : kg.metagraph.hierarchy_edges)
        hier += kg.metagraph.subtype_nodes[sub] + "\t" + kg.metagraph.celltype_nodes[ct] + "\n";
    write_text_file((fs::path(dir) / "hierarchy.tsv").string(), hier);

    write_text_file((fs::path(dir) / "summary.json").string(),
                    summary_to_json(summarize(kg)).dump(2) + "\n");
}

// Loads a bundle directory back into a KnowledgeGraph. Context graphs that
// arrive disconnected are reduced to their largest component (counted in
// `lcc_reduced` when given).
inline KnowledgeGraph load_bundle(const std::string& dir, std::size_t* lcc_reduced = nullptr) {
    namespace fs = std::filesystem;
    KnowledgeGraph kg;
    kg.global = load_global_ppi((fs::path(dir) / "global_ppi.tsv").string());

    std::vector<std::pair<std::string, std::string>> manifest;
    for_each_tsv_line((fs::path(dir) / "contexts.tsv").string(), true,
                      [&](std::size_t row, const std::string& line) {
                          const auto cols = split_tab(line);
                          if (cols.size() < 2)
                              throw ParseError(dir + "/contexts.tsv:" + std::to_string(row) +
                                               ": expected context_id<TAB>filename");
                          manifest.push_back({cols[0], cols[1]});
                      });
    std::sort(manifest.begin(), manifest.end());

    if (lcc_reduced) *lcc_reduced = 0;
    for (const auto& [ctx_id, rel] : manifest) {
        const std::string path = (fs::path(dir) / rel).string();
        std::set<std::string> nodes;
        std::vector<std::pair<std::string, std::string>> edges;
        for_each_tsv_line(path, true, [&](std::size_t row, const std::string& line) {
            const auto cols = split_tab(line);
            if (cols.size() < 2 || cols[0].empty() || cols[1].empty())
                throw ParseError(path + ":" + std::to_string(row) +
                                 ": expected protein_a<TAB>protein_b");
            if (!kg.global.index.count(cols[0]) || !kg.global.index.count(cols[1]))
                throw ParseError(path + ":" + std::to_string(row) +
                                 ": edge endpoint missing from global PPI");
            nodes.insert(cols[0]);
            nodes.insert(cols[1]);
            edges.push_back({cols[0], cols[1]});
        });

        ContextGraph ctx;
        ctx.context_id = ctx_id;
        std::map<std::string, std::uint32_t> local;
        for (const auto& name : nodes) {
            local[name] = static_cast<std::uint32_t>(ctx.nodes.size());
            ctx.nodes.push_back(kg.global.index.at(name));
        }
        std::set<Edge> unique_edges;
        for (const auto& [a, b] : edges) {
            if (a == b) continue;
            unique_edges.insert(make_edge(local.at(a), local.at(b)));
        }
        ctx.edges.assign(unique_edges.begin(), unique_edges.end());

        // Nodes arrive sorted by name but must be sorted by global id.
        std::vector<std::uint32_t> order(ctx.nodes.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return ctx.nodes[a] < ctx.nodes[b];
        });
        std::vector<std::uint32_t> rank(order.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
        std::vector<std::uint32_t> sorted_nodes(ctx.nodes.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) sorted_nodes[i] = ctx.nodes[order[i]];
        ctx.nodes = std::move(sorted_nodes);
        for (auto& [u, v] : ctx.edges) {
            const Edge e = make_edge(rank[u], rank[v]);
            u = e.first;
            v = e.second;
        }
        std::sort(ctx.edges.begin(), ctx.edges.end());

        // Enforce connectivity.
        std::vector<std::vector<std::uint32_t>> adj(ctx.nodes.size());
        for (const auto& [u, v] : ctx.edges) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        const auto comp = detail::components(ctx.nodes.size(), adj);
        bool connected = true;
        for (auto c : comp)
            if (c != 0) connected = false;
        if (!connected) {
            std::vector<std::size_t> comp_size;
            for (auto c : comp) {
                if (c >= comp_size.size()) comp_size.resize(c + 1, 0);
                ++comp_size[c];
            }
            std::uint32_t best = 0;
            for (std::uint32_t c = 1; c < comp_size.size(); ++c)
                if (comp_size[c] > comp_size[best]) best = c;
            std::vector<std::uint32_t> relabel(ctx.nodes.size(), UINT32_MAX);
            std::vector<std::uint32_t> kept;
            for (std::uint32_t i = 0; i < ctx.nodes.size(); ++i)
                if (comp[i] == best) {
                    relabel[i] = static_cast<std::uint32_t>(kept.size());
                    kept.push_back(ctx.nodes[i]);
                }
            std::vector<Edge> kept_edges;
            for (const auto& [u, v] : ctx.edges)
                if (relabel[u] != UINT32_MAX && relabel[v] != UINT32_MAX)
                    kept_edges.push_back(make_edge(relabel[u], relabel[v]));
            ctx.nodes = std::move(kept);
            ctx.edges = std::move(kept_edges);
            std::sort(ctx.edges.begin(), ctx.edges.end());
            if (lcc_reduced) ++(*lcc_reduced);
        }
        kg.contexts.push_back(std::move(ctx));
    }

    std::map<std::string, std::string> hierarchy =
        load_hierarchy((fs::path(dir) / "hierarchy.tsv").string());
    std::set<std::pair<std::string, std::string>> subtype_edges;
    const std::string mg_path = (fs::path(dir) / "metagraph_edges.tsv").string();
    if (fs::exists(mg_path)) {
        for_each_tsv_line(mg_path, true, [&](std::size_t row, const std::string& line) {
            const auto cols = split_tab(line);
            if (cols.size() < 2)
                throw ParseError(mg_path + ":" + std::to_string(row) +
                                 ": expected subtype<TAB>subtype");
            if (cols[0] == cols[1]) return;
            auto pair = std::minmax(cols[0], cols[1]);
            subtype_edges.insert({pair.first, pair.second});
        });
    }

    std::map<std::string, std::string> kept_hierarchy;
    for (const auto& ctx : kg.contexts) {
        auto it = hierarchy.find(ctx.context_id);
        if (it == hierarchy.end()) throw MissingParent(ctx.context_id);
        kept_hierarchy[ctx.context_id] = it->second;
    }
    kg.metagraph = assemble_metagraph(subtype_edges, kept_hierarchy);
    return kg;
}

}  // namespace ctxppi
