#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxppi/analysis.hpp"
#include "ctxppi/finetune.hpp"
#include "ctxppi/metrics.hpp"
#include "ctxppi/model.hpp"
#include "ctxppi/pretrain.hpp"
#include "ctxppi/tsv.hpp"

namespace ctxppi {

namespace detail {

inline std::string opt_field(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
}

inline nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

// Appendix-A-shaped per-context link prediction table.
inline std::string metrics_to_csv(const std::vector<std::pair<std::string, BinaryMetrics>>& rows) {
    std::string csv = "context,auroc,ap,acc,f1\n";
    for (const auto& [ctx, m] : rows)
        csv += ctx + "," + detail::opt_field(m.auroc) + "," + detail::opt_field(m.ap) + "," +
               detail::opt_field(m.acc) + "," + detail::opt_field(m.f1) + "\n";
    return csv;
}

inline std::string ranking_to_csv(
    const std::vector<std::pair<std::string, RankingMetrics>>& rows) {
    std::string csv = "context,ap5,ap10,auprc,auroc,p5,p10,r5,r10\n";
    for (const auto& [ctx, m] : rows)
        csv += ctx + "," + detail::opt_field(m.ap5) + "," + detail::opt_field(m.ap10) + "," +
               detail::opt_field(m.auprc) + "," + detail::opt_field(m.auroc) + "," +
               detail::opt_field(m.p5) + "," + detail::opt_field(m.p10) + "," +
               detail::opt_field(m.r5) + "," + detail::opt_field(m.r10) + "\n";
    return csv;
}

// Wall-clock time is intentionally not serialized; identical runs must
// produce byte-identical artifacts.
inline nlohmann::json train_report_to_json(const TrainReport& r) {
    nlohmann::json per_context = nlohmann::json::array();
    for (const auto& [ctx, m] : r.test_metrics)
        per_context.push_back({{"context", ctx},
                               {"auroc", detail::opt_json(m.auroc)},
                               {"ap", detail::opt_json(m.ap)},
                               {"acc", detail::opt_json(m.acc)},
                               {"f1", detail::opt_json(m.f1)}});
    return {
        {"epoch_loss", r.epoch_loss},
        {"val_auroc", r.val_auroc},
        {"epochs_run", r.epochs_run},
        {"best_epoch", r.best_epoch},
        {"best_val_auroc", r.best_val_auroc},
        {"aborted_non_finite", r.aborted_non_finite},
        {"test_metrics", per_context},
        {"warnings", r.warnings},
    };
}

inline std::string protein_embeddings_to_tsv(const EmbeddingTable& table) {
    std::string tsv = "context\tprotein";
    for (std::size_t k = 0; k < table.dim; ++k) tsv += "\tv" + std::to_string(k);
    tsv += "\n";
    for (const auto& blk : table.contexts) {
        for (std::size_t r = 0; r < blk.protein_ids.size(); ++r) {
            tsv += blk.context_id + "\t" + table.protein_names[blk.protein_ids[r]];
            for (std::size_t k = 0; k < table.dim; ++k)
                tsv += "\t" + fmt_double(blk.embeddings.at(r, k));
            tsv += "\n";
        }
    }
    return tsv;
}

inline std::string cell_embeddings_to_tsv(const EmbeddingTable& table) {
    std::string tsv = "node\tkind";
    for (std::size_t k = 0; k < table.dim; ++k) tsv += "\tv" + std::to_string(k);
    tsv += "\n";
    for (std::size_t i = 0; i < table.cell_labels.size(); ++i) {
        tsv += table.cell_labels[i];
        tsv += i < table.n_subtypes ? "\tsubtype" : "\tcelltype";
        for (std::size_t k = 0; k < table.dim; ++k)
            tsv += "\t" + fmt_double(table.cell_embeddings.at(i, k));
        tsv += "\n";
    }
    return tsv;
}

inline std::string scores_to_csv(const std::vector<ContextScore>& scores) {
    std::string csv = "gene,context,score\n";
    for (const auto& s : scores) csv += s.gene + "," + s.context_id + "," + fmt_double(s.score) + "\n";
    return csv;
}

// One ranked context list per gene.
inline nlohmann::json rankings_to_json(
    const std::vector<std::pair<std::string, std::vector<ContextScore>>>& per_gene) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [gene, ranked] : per_gene) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& cs : ranked)
            list.push_back({{"context", cs.context_id}, {"score", cs.score}});
        out[gene] = std::move(list);
    }
    return out;
}

inline std::string comparison_to_csv(const ComparisonReport& report) {
    std::string csv = "metric,wins,total,percent\n";
    for (const auto& row : report.rows) {
        char pct[16];
        std::snprintf(pct, sizeof(pct), "%.2f", row.percent);
        csv += row.metric + "," + std::to_string(row.wins) + "," + std::to_string(row.total) +
               "," + pct + "\n";
    }
    return csv;
}

inline nlohmann::json comparison_to_json(const ComparisonReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows)
        rows.push_back({{"metric", row.metric},
                        {"wins", row.wins},
                        {"total", row.total},
                        {"percent", row.percent}});
    return {{"rows", rows}};
}

inline std::string marker_contrast_to_csv(
    const std::vector<std::pair<std::string, std::vector<MarkerScore>>>& per_context) {
    std::string csv = "context,rank,gene,contrast\n";
    for (const auto& [ctx, scores] : per_context) {
        std::size_t rank = 1;
        for (const auto& ms : scores)
            csv += ctx + "," + std::to_string(rank++) + "," + ms.gene + "," +
                   fmt_double(ms.contrast) + "\n";
    }
    return csv;
}

}  // namespace ctxppi
