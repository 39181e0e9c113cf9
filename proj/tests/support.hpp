#pragma once

// Shared test helpers: brute-force metric oracles and scratch directories.
// The oracles enumerate pairs/prefixes directly and stay independent of the
// library implementations they check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctxppi/graph.hpp"
#include "ctxppi/rng.hpp"

namespace testsupport {

// Small two-context knowledge graph: a 5-node cluster and a 4-node cluster
// sharing proteins d and e, both subtypes under one cell type.
inline ctxppi::KnowledgeGraph toy_kg() {
    ctxppi::GlobalPPI global = ctxppi::GlobalPPI::from_edges({
        {"a", "b"}, {"b", "c"}, {"a", "c"}, {"c", "d"}, {"d", "e"},
        {"e", "f"}, {"f", "g"}, {"d", "g"}, {"e", "g"},
    });
    return ctxppi::build_knowledge_graph(
        std::move(global),
        {{"c1", {"a", "b", "c", "d", "e"}}, {"c2", {"d", "e", "f", "g"}}},
        {{"c1", "c2"}}, {{"c1", "X"}, {"c2", "X"}}, 2, nullptr);
}

// Seeded random knowledge graph with `n_ctx` contexts over `n` proteins.
inline ctxppi::KnowledgeGraph random_kg(std::uint64_t seed, std::size_t n = 30,
                                        std::size_t n_ctx = 3, double edge_p = 0.2) {
    ctxppi::Rng rng(seed);
    std::vector<std::pair<std::string, std::string>> raw;
    auto name = [](std::size_t i) { return "p" + std::to_string(100 + i); };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.u01() < edge_p) raw.push_back({name(i), name(j)});
    ctxppi::GlobalPPI global = ctxppi::GlobalPPI::from_edges(raw);
    std::map<std::string, std::set<std::string>> activation;
    std::map<std::string, std::string> hierarchy;
    std::set<std::pair<std::string, std::string>> lr;
    std::vector<std::string> ctx_ids;
    for (std::size_t c = 0; c < n_ctx; ++c) {
        const std::string id = "ctx" + std::to_string(c);
        ctx_ids.push_back(id);
        std::set<std::string> genes;
        for (std::size_t i = 0; i < n; ++i)
            if (rng.u01() < 0.7) genes.insert(name(i));
        activation[id] = genes;
        hierarchy[id] = "ct" + std::to_string(c % 2);
    }
    for (std::size_t c = 1; c < n_ctx; ++c) {
        auto pair = std::minmax(ctx_ids[c - 1], ctx_ids[c]);
        lr.insert({pair.first, pair.second});
    }
    return ctxppi::build_knowledge_graph(std::move(global), activation, lr, hierarchy, 3,
                                         nullptr);
}

// Pairwise Mann-Whitney count: ties contribute 1/2.
inline std::optional<double> auroc_oracle(const std::vector<double>& scores,
                                          const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++n_pos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    for (int l : labels) n_neg += l ? 0 : 1;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Stable descending order by score (ties keep input order), shared by all
// prefix-based oracles below so they mirror the library's tie rule.
inline std::vector<std::size_t> desc_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

inline std::optional<double> ap_oracle(const std::vector<double>& scores,
                                       const std::vector<int>& labels) {
    const auto order = desc_order(scores);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (!labels[order[r]]) continue;
        ++hits;
        // precision of the prefix ending at this hit, recomputed from scratch
        std::size_t in_prefix = 0;
        for (std::size_t k = 0; k <= r; ++k) in_prefix += labels[order[k]] ? 1 : 0;
        sum += static_cast<double>(in_prefix) / static_cast<double>(r + 1);
    }
    return sum / static_cast<double>(n_pos);
}

inline std::optional<double> ap_at_k_oracle(const std::vector<double>& scores,
                                            const std::vector<int>& labels, std::size_t k) {
    const auto order = desc_order(scores);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    const std::size_t k_eff = std::min(k, order.size());
    double sum = 0.0;
    for (std::size_t r = 0; r < k_eff; ++r) {
        if (!labels[order[r]]) continue;
        std::size_t in_prefix = 0;
        for (std::size_t j = 0; j <= r; ++j) in_prefix += labels[order[j]] ? 1 : 0;
        sum += static_cast<double>(in_prefix) / static_cast<double>(r + 1);
    }
    return sum / static_cast<double>(std::min(k_eff, n_pos));
}

inline std::optional<double> p_at_k_oracle(const std::vector<double>& scores,
                                           const std::vector<int>& labels, std::size_t k) {
    if (scores.empty()) return std::nullopt;
    const auto order = desc_order(scores);
    const std::size_t k_eff = std::min(k, order.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k_eff; ++r) hits += labels[order[r]] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(k_eff);
}

inline std::optional<double> r_at_k_oracle(const std::vector<double>& scores,
                                           const std::vector<int>& labels, std::size_t k) {
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    const auto order = desc_order(scores);
    const std::size_t k_eff = std::min(k, order.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k_eff; ++r) hits += labels[order[r]] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(n_pos);
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("ctxppi_test_" + tag + "_" + std::to_string(++counter) + "_" +
                 std::to_string(static_cast<std::uint64_t>(
                     std::hash<std::string>{}(tag + std::to_string(counter)))));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& rel = "") const {
        return rel.empty() ? path_.string() : (path_ / rel).string();
    }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
