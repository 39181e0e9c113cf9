#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "ctxppi/errors.hpp"

namespace ctxppi {

// Held-out link prediction metrics. Metrics undefined on the given inputs
// (e.g. AUROC on a single-class set) are absent rather than zero.
struct BinaryMetrics {
    std::optional<double> auroc;
    std::optional<double> ap;
    std::optional<double> acc;
    std::optional<double> f1;
};

// Per-context gene ranking metrics, k pinned at 5 and 10.
struct RankingMetrics {
    std::optional<double> ap5;
    std::optional<double> ap10;
    std::optional<double> auprc;
    std::optional<double> auroc;
    std::optional<double> p5;
    std::optional<double> p10;
    std::optional<double> r5;
    std::optional<double> r10;
};

namespace detail {

inline void check_metric_inputs(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ContractViolation("metrics: scores and labels differ in length");
}

// Indices sorted by score descending; ties keep input order.
inline std::vector<std::size_t> rank_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace detail

// Mann-Whitney AUROC with average-rank tie correction.
inline std::optional<double> auroc(const std::vector<double>& scores,
                                   const std::vector<int>& labels) {
    detail::check_metric_inputs(scores, labels);
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based average
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Average precision = area under the precision-recall curve with step
// interpolation: the mean of precision at each positive's rank.
inline std::optional<double> average_precision(const std::vector<double>& scores,
                                               const std::vector<int>& labels) {
    detail::check_metric_inputs(scores, labels);
    const auto order = detail::rank_order(scores);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    double hits = 0.0, sum = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (labels[order[r]]) {
            hits += 1.0;
            sum += hits / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(n_pos);
}

// Truncated AP: precision summed at positive hits within the top k,
// normalized by min(k, total positives).
inline std::optional<double> ap_at_k(const std::vector<double>& scores,
                                     const std::vector<int>& labels, std::size_t k) {
    detail::check_metric_inputs(scores, labels);
    const auto order = detail::rank_order(scores);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    const std::size_t k_eff = std::min(k, order.size());
    double hits = 0.0, sum = 0.0;
    for (std::size_t r = 0; r < k_eff; ++r) {
        if (labels[order[r]]) {
            hits += 1.0;
            sum += hits / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(std::min(k_eff, n_pos));
}

inline std::optional<double> precision_at_k(const std::vector<double>& scores,
                                            const std::vector<int>& labels, std::size_t k) {
    detail::check_metric_inputs(scores, labels);
    if (scores.empty()) return std::nullopt;
    const auto order = detail::rank_order(scores);
    const std::size_t k_eff = std::min(k, order.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k_eff; ++r) hits += labels[order[r]] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(k_eff);
}

inline std::optional<double> recall_at_k(const std::vector<double>& scores,
                                         const std::vector<int>& labels, std::size_t k) {
    detail::check_metric_inputs(scores, labels);
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    const auto order = detail::rank_order(scores);
    const std::size_t k_eff = std::min(k, order.size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < k_eff; ++r) hits += labels[order[r]] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(n_pos);
}

// Threshold-0.5 classification: predicted positive iff score >= 0.5.
inline std::optional<double> accuracy_at_half(const std::vector<double>& scores,
                                              const std::vector<int>& labels) {
    detail::check_metric_inputs(scores, labels);
    if (scores.empty()) return std::nullopt;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        correct += ((scores[i] >= 0.5) == (labels[i] != 0)) ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

inline std::optional<double> f1_at_half(const std::vector<double>& scores,
                                        const std::vector<int>& labels) {
    detail::check_metric_inputs(scores, labels);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= 0.5;
        const bool truth = labels[i] != 0;
        if (pred && truth) ++tp;
        if (pred && !truth) ++fp;
        if (!pred && truth) ++fn;
    }
    if (tp + fn == 0) return std::nullopt;  // no positives in the set
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

inline BinaryMetrics binary_metrics(const std::vector<double>& scores,
                                    const std::vector<int>& labels) {
    BinaryMetrics m;
    m.auroc = auroc(scores, labels);
    m.ap = average_precision(scores, labels);
    m.acc = accuracy_at_half(scores, labels);
    m.f1 = f1_at_half(scores, labels);
    return m;
}

inline RankingMetrics ranking_metrics(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
    RankingMetrics m;
    m.ap5 = ap_at_k(scores, labels, 5);
    m.ap10 = ap_at_k(scores, labels, 10);
    m.auprc = average_precision(scores, labels);
    m.auroc = auroc(scores, labels);
    m.p5 = precision_at_k(scores, labels, 5);
    m.p10 = precision_at_k(scores, labels, 10);
    m.r5 = recall_at_k(scores, labels, 5);
    m.r10 = recall_at_k(scores, labels, 10);
    return m;
}

}  // namespace ctxppi
