#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "ctxppi/analysis.hpp"
#include "ctxppi/random_walk.hpp"
#include "ctxppi/rng.hpp"
#include "ctxppi/svg.hpp"
#include "support.hpp"

using namespace ctxppi;
namespace ts = testsupport;

namespace {

EmbeddingTable gene_table(
    const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::vector<double>>>>>&
        blocks) {
    EmbeddingTable table;
    std::set<std::string> names;
    for (const auto& [ctx, rows] : blocks)
        for (const auto& [gene, vec] : rows) {
            names.insert(gene);
            table.dim = vec.size();
        }
    table.protein_names.assign(names.begin(), names.end());
    for (const auto& [ctx, rows] : blocks) {
        EmbeddingTable::ContextBlock blk;
        blk.context_id = ctx;
        std::vector<std::pair<std::uint32_t, std::vector<double>>> sorted;
        for (const auto& [gene, vec] : rows) sorted.push_back({*table.protein_id(gene), vec});
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        blk.embeddings = Matrix(sorted.size(), table.dim);
        for (std::size_t r = 0; r < sorted.size(); ++r) {
            blk.protein_ids.push_back(sorted[r].first);
            std::copy(sorted[r].second.begin(), sorted[r].second.end(), blk.embeddings.row(r));
        }
        table.contexts.push_back(std::move(blk));
    }
    return table;
}

}  // namespace

TEST_CASE("cosine basics", "[analysis]") {
    const std::vector<double> x{1.0, 1.0};
    const std::vector<double> e0{1.0, 0.0};
    const std::vector<double> e1{0.0, 1.0};
    REQUIRE(cosine(x, x) == Catch::Approx(1.0));
    REQUIRE(cosine(e0, e1) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(cosine(x, e0) == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-12));
    REQUIRE_THROWS_AS(cosine({0.0, 0.0}, {1.0, 0.0}), DegenerateVector);
}

TEST_CASE("cosine scale invariance", "[analysis]") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(10);
        std::vector<double> u(n), v(n), su(n);
        const double alpha = rng.uniform(0.01, 50.0);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = rng.uniform(-1.0, 1.0);
            v[i] = rng.uniform(-1.0, 1.0);
            su[i] = alpha * u[i];
        }
        if (norm2(u.data(), n) == 0.0 || norm2(v.data(), n) == 0.0) continue;
        REQUIRE(cosine(su, v) == Catch::Approx(cosine(u, v)).margin(1e-12));
    }
}

TEST_CASE("protein_context_similarity", "[analysis]") {
    SECTION("identical embeddings give an all-ones matrix") {
        const auto table = gene_table({
            {"c1", {{"g", {1, 2, 3}}}},
            {"c2", {{"g", {1, 2, 3}}}},
            {"c3", {{"g", {1, 2, 3}}}},
        });
        const auto sim = protein_context_similarity("g", table);
        REQUIRE(sim.labels.size() == 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                REQUIRE(sim.values.at(i, j) == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("two contexts give a 2x2 with unit diagonal") {
        const auto table = gene_table({
            {"c1", {{"g", {1.0, 0.0}}}},
            {"c2", {{"g", {1.0, 1.0}}}},
        });
        const auto sim = protein_context_similarity("g", table);
        REQUIRE(sim.labels.size() == 2);
        REQUIRE(sim.values.at(0, 0) == Catch::Approx(1.0));
        REQUIRE(sim.values.at(1, 1) == Catch::Approx(1.0));
        REQUIRE(sim.values.at(0, 1) == Catch::Approx(std::sqrt(2.0) / 2.0).margin(1e-12));
        REQUIRE(sim.values.at(0, 1) == sim.values.at(1, 0));
    }

    SECTION("insufficient contexts rejected") {
        const auto table = gene_table({{"c1", {{"g", {1, 0}}, {"h", {0, 1}}}}});
        REQUIRE_THROWS_AS(protein_context_similarity("g", table), InsufficientContexts);
        REQUIRE_THROWS_AS(protein_context_similarity("ghost", table), InsufficientContexts);
    }

    SECTION("clustering order groups planted similar contexts") {
        // two families of contexts: g points along e0 in a*, along e1 in b*
        const auto table = gene_table({
            {"a1", {{"g", {1.0, 0.05}}}},
            {"b1", {{"g", {0.05, 1.0}}}},
            {"a2", {{"g", {0.9, 0.0}}}},
            {"b2", {{"g", {0.0, 1.1}}}},
            {"a3", {{"g", {1.1, 0.1}}}},
        });
        const auto sim = protein_context_similarity("g", table);
        std::vector<std::size_t> a_positions;
        for (std::size_t i = 0; i < sim.labels.size(); ++i)
            if (sim.labels[i][0] == 'a') a_positions.push_back(i);
        REQUIRE(a_positions.size() == 3);
        REQUIRE(a_positions.back() - a_positions.front() == 2);  // contiguous run
    }
}

TEST_CASE("cell_similarity", "[analysis]") {
    EmbeddingTable table;
    table.dim = 2;
    table.cell_labels = {"sub1", "ct1"};
    table.n_subtypes = 1;
    table.cell_embeddings = Matrix(2, 2);
    table.cell_embeddings.at(0, 0) = 1.0;
    table.cell_embeddings.at(1, 0) = 1.0;
    table.cell_embeddings.at(1, 1) = 1.0;

    const auto sim = cell_similarity(table);
    REQUIRE(sim.labels.size() == 2);
    REQUIRE(sim.values.at(0, 0) == Catch::Approx(1.0));
    REQUIRE(sim.values.at(0, 1) == Catch::Approx(sim.values.at(1, 0)).margin(1e-9));

    table.cell_labels = {"only"};
    table.cell_embeddings = Matrix(1, 2, 1.0);
    REQUIRE_THROWS_AS(cell_similarity(table), InsufficientContexts);
}

TEST_CASE("similarity matrices stay symmetric with unit diagonal", "[analysis]") {
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n_ctx = 3 + rng.below(4);
        std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::vector<double>>>>>
            blocks;
        for (std::size_t c = 0; c < n_ctx; ++c) {
            std::vector<double> v(5);
            for (auto& x : v) x = rng.uniform(-1.0, 1.0);
            blocks.push_back({"c" + std::to_string(c), {{"g", v}}});
        }
        const auto sim = protein_context_similarity("g", gene_table(blocks));
        for (std::size_t i = 0; i < sim.labels.size(); ++i) {
            REQUIRE(sim.values.at(i, i) == Catch::Approx(1.0).margin(1e-9));
            for (std::size_t j = 0; j < sim.labels.size(); ++j)
                REQUIRE(sim.values.at(i, j) ==
                        Catch::Approx(sim.values.at(j, i)).margin(1e-9));
        }
    }
}

TEST_CASE("marker_contrast", "[analysis]") {
    SECTION("identical-everywhere gene aligned with the centroid scores zero") {
        const auto table = gene_table({
            {"c1", {{"g", {1.0, 0.0}}, {"h", {2.0, 0.0}}}},
            {"c2", {{"g", {1.0, 0.0}}, {"h", {2.0, 0.0}}}},
        });
        const auto out = marker_contrast(table);
        for (const auto& [ctx, scores] : out)
            for (const auto& ms : scores)
                REQUIRE(ms.contrast == Catch::Approx(0.0).margin(1e-12));
    }

    SECTION("planted context-specific gene ranks above the batch median") {
        // marker 'm' flips direction in c1 relative to its other contexts
        std::vector<std::pair<std::string, std::vector<double>>> base{
            {"a", {1.0, 0.1}}, {"b", {0.9, -0.1}}, {"c", {1.1, 0.0}},
        };
        auto c1 = base;
        c1.push_back({"m", {1.0, 0.2}});  // aligned with c1's centroid
        auto c2 = base;
        c2.push_back({"m", {-1.0, 0.3}});  // opposite elsewhere
        auto c3 = base;
        c3.push_back({"m", {-0.9, -0.2}});
        const auto table = gene_table({{"c1", c1}, {"c2", c2}, {"c3", c3}});
        const auto out = marker_contrast(table);
        const auto& c1_scores = out[0].second;
        REQUIRE(out[0].first == "c1");
        REQUIRE(c1_scores.front().gene == "m");  // ranked first in c1
        // above median: first of four entries
        for (std::size_t i = 1; i < c1_scores.size(); ++i)
            REQUIRE(c1_scores[0].contrast > c1_scores[i].contrast);
    }

    SECTION("single-context genes are skipped") {
        const auto table = gene_table({
            {"c1", {{"g", {1.0, 0.0}}, {"solo", {0.0, 1.0}}}},
            {"c2", {{"g", {1.0, 0.0}}}},
        });
        const auto out = marker_contrast(table);
        for (const auto& [ctx, scores] : out)
            for (const auto& ms : scores) REQUIRE(ms.gene != "solo");
    }

    SECTION("context enumeration order does not change scores") {
        const auto t1 = gene_table({
            {"c1", {{"g", {1.0, 0.2}}, {"h", {0.4, 1.0}}}},
            {"c2", {{"g", {0.2, 1.0}}, {"h", {1.0, 0.1}}}},
        });
        const auto t2 = gene_table({
            {"c2", {{"g", {0.2, 1.0}}, {"h", {1.0, 0.1}}}},
            {"c1", {{"g", {1.0, 0.2}}, {"h", {0.4, 1.0}}}},
        });
        auto flat = [](const auto& out) {
            std::map<std::pair<std::string, std::string>, double> m;
            for (const auto& [ctx, scores] : out)
                for (const auto& ms : scores) m[{ctx, ms.gene}] = ms.contrast;
            return m;
        };
        REQUIRE(flat(marker_contrast(t1)) == flat(marker_contrast(t2)));
    }
}

TEST_CASE("random_walk_embeddings", "[analysis]") {
    // two disconnected cliques
    std::vector<std::pair<std::string, std::string>> raw;
    auto name = [](int k) { return std::string("n") + (k < 10 ? "0" : "") + std::to_string(k); };
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) raw.push_back({name(i), name(j)});
    for (int i = 8; i < 16; ++i)
        for (int j = i + 1; j < 16; ++j) raw.push_back({name(i), name(j)});
    const auto graph = GlobalPPI::from_edges(raw);

    const Matrix emb = random_walk_embeddings(graph, 4, 7);
    REQUIRE(emb.rows == graph.n_proteins());
    REQUIRE(emb.cols == 4);
    REQUIRE(emb.all_finite());

    const Matrix again = random_walk_embeddings(graph, 4, 7);
    REQUIRE(emb == again);

    double within = 0.0, cross = 0.0;
    std::size_t nw = 0, nc = 0;
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = i + 1; j < 16; ++j) {
            const double c = cosine(emb.row(i), emb.row(j), 4);
            const bool same = (i < 8) == (j < 8);
            (same ? within : cross) += c;
            (same ? nw : nc) += 1;
        }
    REQUIRE(within / static_cast<double>(nw) > cross / static_cast<double>(nc));

    REQUIRE_THROWS_AS(random_walk_embeddings(graph, 17, 7), ContractViolation);
}

TEST_CASE("table_from_global_embeddings mirrors the activation pattern", "[analysis]") {
    const auto kg = ts::toy_kg();
    Rng rng(3);
    Matrix emb(kg.global.n_proteins(), 4);
    for (auto& v : emb.data) v = rng.uniform(-1.0, 1.0);
    const auto table = table_from_global_embeddings(kg, emb);
    REQUIRE(table.contexts.size() == kg.contexts.size());
    std::size_t expected = 0;
    for (const auto& ctx : kg.contexts) expected += ctx.n_nodes();
    REQUIRE(table.n_protein_entries() == expected);
    // the same protein carries the same vector in every context
    for (const auto& blk : table.contexts)
        for (std::size_t r = 0; r < blk.protein_ids.size(); ++r)
            for (std::size_t k = 0; k < 4; ++k)
                REQUIRE(blk.embeddings.at(r, k) == emb.at(blk.protein_ids[r], k));
}

TEST_CASE("compare_models win percentages", "[analysis]") {
    auto metrics_for = [](double auprc) {
        RankingMetrics m;
        m.ap5 = m.ap10 = m.auprc = m.auroc = m.p5 = m.p10 = m.r5 = m.r10 = auprc;
        return m;
    };

    SECTION("34 of 48 strict wins reports 70.83") {
        std::vector<std::pair<std::string, RankingMetrics>> model, baseline;
        for (int c = 0; c < 48; ++c) {
            const std::string id = "ctx" + std::to_string(c);
            model.push_back({id, metrics_for(c < 34 ? 0.9 : 0.5)});
            baseline.push_back({id, metrics_for(0.5)});  // ties are non-wins
        }
        const auto report = compare_models(model, baseline);
        REQUIRE(report.rows.size() == 8);
        REQUIRE(report.rows[0].metric == "AP@5");
        for (const auto& row : report.rows) {
            REQUIRE(row.wins == 34);
            REQUIRE(row.total == 48);
            REQUIRE(row.percent == Catch::Approx(70.83));
        }
    }

    SECTION("identical metrics give zero percent") {
        std::vector<std::pair<std::string, RankingMetrics>> m{{"a", metrics_for(0.4)},
                                                              {"b", metrics_for(0.6)}};
        const auto report = compare_models(m, m);
        for (const auto& row : report.rows) REQUIRE(row.percent == 0.0);
    }

    SECTION("uniformly better gives one hundred percent") {
        std::vector<std::pair<std::string, RankingMetrics>> model{{"a", metrics_for(0.9)}},
            baseline{{"a", metrics_for(0.1)}};
        const auto report = compare_models(model, baseline);
        for (const auto& row : report.rows) REQUIRE(row.percent == 100.0);
    }

    SECTION("context mismatch rejected") {
        std::vector<std::pair<std::string, RankingMetrics>> model{{"a", metrics_for(0.9)}},
            baseline{{"b", metrics_for(0.1)}};
        REQUIRE_THROWS_AS(compare_models(model, baseline), ContractViolation);
    }
}

TEST_CASE("similarity exports", "[analysis]") {
    const auto table = gene_table({
        {"c1", {{"g", {1.0, 0.0}}}},
        {"c2", {{"g", {0.8, 0.6}}}},
    });
    const auto sim = protein_context_similarity("g", table);
    const std::string csv = similarity_to_csv(sim);
    REQUIRE(csv.find("label,") == 0);
    REQUIRE(csv.find("c1") != std::string::npos);
    // diagonal written as exactly 1
    REQUIRE(csv.find(",1,") != std::string::npos);

    const std::string svg = render_svg_heatmap(sim);
    REQUIRE(svg.find("<svg") == 0);
    REQUIRE(svg.find("rect") != std::string::npos);
    REQUIRE(svg.find("c2") != std::string::npos);
}
