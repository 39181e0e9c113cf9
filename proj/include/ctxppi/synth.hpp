#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxppi/errors.hpp"
#include "ctxppi/finetune.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/rng.hpp"

namespace ctxppi {

// Planted-structure benchmark mirroring the real construction: one global
// stochastic block graph over the protein universe, and per-context graphs
// induced on sampled activated subsets (largest component kept). Contexts
// therefore share the global edge set, exactly like contextual PPI networks
// induced from one reference interactome. The block holding the risk genes
// is the planted signal for fine-tuning.
struct SyntheticSpec {
    std::size_t n_proteins = 200;
    std::size_t n_contexts = 4;
    std::size_t blocks = 4;  // blocks per context
    double intra_p = 0.15;
    double inter_p = 0.01;
    std::size_t risk_block = 0;
    std::size_t n_pos_labels = 40;
    std::size_t n_neg_labels = 40;
    double active_fraction = 0.85;
    std::size_t min_nodes = 10;

    void validate() const {
        if (intra_p < 0.0 || intra_p > 1.0 || inter_p < 0.0 || inter_p > 1.0)
            throw SpecError("synthetic spec: probabilities must be in [0,1]");
        if (intra_p < inter_p)
            throw SpecError("synthetic spec: intra-block probability below inter-block removes "
                            "the planted signal");
        if (blocks < 1 || blocks > n_proteins)
            throw SpecError("synthetic spec: blocks must be in [1, n_proteins]");
        if (risk_block >= blocks) throw SpecError("synthetic spec: risk_block out of range");
        if (n_contexts < 1) throw SpecError("synthetic spec: need at least one context");
        if (active_fraction <= 0.0 || active_fraction > 1.0)
            throw SpecError("synthetic spec: active_fraction must be in (0,1]");
        const std::size_t risk_size = block_size(risk_block);
        if (n_pos_labels > risk_size)
            throw SpecError("synthetic spec: more positive labels than risk-block genes (" +
                            std::to_string(n_pos_labels) + " > " + std::to_string(risk_size) + ")");
        if (n_neg_labels > n_proteins - risk_size)
            throw SpecError("synthetic spec: more negative labels than non-risk genes");
    }

    std::size_t block_size(std::size_t b) const {
        return n_proteins / blocks + (b < n_proteins % blocks ? 1 : 0);
    }
};

struct SyntheticBundle {
    KnowledgeGraph kg;
    RiskLabelSet labels;
    nlohmann::json ground_truth;
};

namespace detail {

inline std::string padded_name(const char* prefix, std::size_t i, std::size_t count) {
    std::size_t width = 1;
    for (std::size_t x = count > 0 ? count - 1 : 0; x >= 10; x /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, static_cast<int>(width), i);
    return buf;
}

}  // namespace detail

inline SyntheticBundle generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const Rng base(seed);

    std::vector<std::string> names(spec.n_proteins);
    for (std::size_t i = 0; i < spec.n_proteins; ++i)
        names[i] = detail::padded_name("P", i, spec.n_proteins);

    // Fixed global block assignment; only the risk block's membership matters
    // across contexts.
    std::vector<std::uint32_t> universe(spec.n_proteins);
    for (std::uint32_t i = 0; i < spec.n_proteins; ++i) universe[i] = i;
    {
        Rng rng = base.fork("blocks");
        rng.shuffle(universe);
    }
    std::vector<std::size_t> global_block(spec.n_proteins);
    {
        std::size_t pos = 0;
        for (std::size_t b = 0; b < spec.blocks; ++b)
            for (std::size_t k = 0; k < spec.block_size(b); ++k) global_block[universe[pos++]] = b;
    }
    std::vector<std::uint32_t> risk_members, non_risk;
    for (std::uint32_t p = 0; p < spec.n_proteins; ++p)
        (global_block[p] == spec.risk_block ? risk_members : non_risk).push_back(p);

    const std::size_t n_ct = std::max<std::size_t>(1, (spec.n_contexts + 5) / 6);
    std::map<std::string, std::string> hierarchy;
    std::set<std::pair<std::string, std::string>> subtype_edges;
    std::vector<std::string> ctx_names(spec.n_contexts);
    for (std::size_t c = 0; c < spec.n_contexts; ++c) {
        ctx_names[c] = detail::padded_name("ctx", c, spec.n_contexts);
        hierarchy[ctx_names[c]] = detail::padded_name("ct", c * n_ct / spec.n_contexts, n_ct);
    }
    for (std::size_t a = 0; a < spec.n_contexts; ++a)  // clique within each cell type
        for (std::size_t b = a + 1; b < spec.n_contexts; ++b)
            if (hierarchy[ctx_names[a]] == hierarchy[ctx_names[b]])
                subtype_edges.insert({ctx_names[a], ctx_names[b]});

    // One global stochastic block graph over the whole universe.
    std::vector<std::pair<std::string, std::string>> global_edges;
    {
        Rng erng = base.fork("edges");
        for (std::uint32_t i = 0; i < spec.n_proteins; ++i)
            for (std::uint32_t j = i + 1; j < spec.n_proteins; ++j) {
                const double p = global_block[i] == global_block[j] ? spec.intra_p : spec.inter_p;
                if (erng.u01() < p) global_edges.push_back({names[i], names[j]});
            }
    }

    SyntheticBundle bundle;
    bundle.kg.global = GlobalPPI::from_edges(global_edges);

    nlohmann::json ctx_truth = nlohmann::json::array();
    for (std::size_t c = 0; c < spec.n_contexts; ++c) {
        const auto n_active = static_cast<std::size_t>(spec.active_fraction *
                                                       static_cast<double>(spec.n_proteins));
        std::vector<std::uint32_t> pool(spec.n_proteins);
        for (std::uint32_t i = 0; i < spec.n_proteins; ++i) pool[i] = i;
        Rng rng = base.fork("active", c);
        rng.shuffle(pool);
        std::set<std::string> activated;
        for (std::size_t i = 0; i < n_active; ++i) activated.insert(names[pool[i]]);

        bundle.kg.contexts.push_back(
            build_context_ppi(bundle.kg.global, ctx_names[c], activated, spec.min_nodes));
        ctx_truth.push_back({{"context", ctx_names[c]},
                             {"n_active", bundle.kg.contexts.back().n_nodes()},
                             {"n_edges", bundle.kg.contexts.back().n_edges()}});
    }
    bundle.kg.metagraph = assemble_metagraph(subtype_edges, hierarchy);

    {
        std::vector<std::uint32_t> pool = risk_members;
        Rng rng = base.fork("labels:pos");
        rng.shuffle(pool);
        for (std::size_t i = 0; i < spec.n_pos_labels; ++i)
            bundle.labels.positives.insert(names[pool[i]]);
    }
    {
        std::vector<std::uint32_t> pool = non_risk;
        Rng rng = base.fork("labels:neg");
        rng.shuffle(pool);
        for (std::size_t i = 0; i < spec.n_neg_labels; ++i)
            bundle.labels.negatives.insert(names[pool[i]]);
    }

    nlohmann::json risk_json = nlohmann::json::array();
    for (auto p : risk_members) risk_json.push_back(names[p]);
    bundle.ground_truth = {
        {"spec",
         {{"n_proteins", spec.n_proteins},
          {"n_contexts", spec.n_contexts},
          {"blocks", spec.blocks},
          {"intra_p", spec.intra_p},
          {"inter_p", spec.inter_p},
          {"risk_block", spec.risk_block},
          {"n_pos_labels", spec.n_pos_labels},
          {"n_neg_labels", spec.n_neg_labels},
          {"active_fraction", spec.active_fraction}}},
        {"seed", seed},
        {"risk_block_genes", risk_json},
        {"contexts", ctx_truth},
    };
    return bundle;
}

}  // namespace ctxppi
