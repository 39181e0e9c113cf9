// Command-line driver for the contextual PPI embedding toolkit.
//
// Subcommands: build-graph, synth, pretrain, finetune, analyze, compare,
// report. Every command reads an optional flat key=value config file
// (--config); command-line flags override config values, which override
// defaults. Commands that sample require an explicit --seed; nothing is
// seeded from the wall clock. Exit codes: 0 success, 1 runtime failure,
// 2 usage or input error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ctxppi/ctxppi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_input_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path))
        throw ctxppi::ParseError(what + " file not found: " + path);
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    ctxppi::write_text_file(path.string(), content);
}

struct CommonOpts {
    std::string out;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

// --config reads key=value lines; CLI flags take precedence over file values.
void add_common(CLI::App* cmd, CommonOpts& c, bool seed_required) {
    cmd->set_config("--config", "", "flat key=value config file");
    cmd->add_option("--out", c.out, "output directory")->required();
    auto* seed = cmd->add_option("--seed", c.seed, "random seed (no wall-clock seeding)");
    if (seed_required) seed->required();
    cmd->add_option("--threads", c.threads, "worker thread cap; 1 = fully deterministic mode")
        ->check(CLI::PositiveNumber);
}

struct ModelFlags {
    std::size_t latent_dim = 32;
    std::size_t protein_layers = 2;
    std::size_t heads = 2;
    std::size_t metagraph_layers = 1;
};

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
    cmd->add_option("--latent-dim", m.latent_dim, "embedding dimension");
    cmd->add_option("--protein-layers", m.protein_layers, "attention layers before the bridge");
    cmd->add_option("--heads", m.heads, "attention heads per layer");
    cmd->add_option("--metagraph-layers", m.metagraph_layers, "metagraph attention layers");
}

// ---- build-graph ---------------------------------------------------------

struct BuildGraphArgs {
    CommonOpts common;
    std::string ppi, deg, lr, hierarchy;
    double lr_threshold = 0.05;
    std::size_t min_nodes = 10;
};

int cmd_build_graph(const BuildGraphArgs& a) {
    require_input_file(a.ppi, "global PPI");
    require_input_file(a.deg, "DEG table");
    require_input_file(a.lr, "LR table");
    require_input_file(a.hierarchy, "hierarchy");

    std::size_t self_loops = 0;
    ctxppi::GlobalPPI global = ctxppi::load_global_ppi(a.ppi, &self_loops);
    const auto deg_table = ctxppi::load_deg_table(a.deg);
    const auto lr_table = ctxppi::load_lr_table(a.lr);
    const auto hierarchy = ctxppi::load_hierarchy(a.hierarchy);

    const auto activation = ctxppi::select_activated_genes(deg_table);
    const auto lr_edges = ctxppi::select_lr_edges(lr_table, a.lr_threshold);

    ctxppi::KgWarnings warnings;
    warnings.self_loops_dropped = self_loops;
    const auto kg = ctxppi::build_knowledge_graph(std::move(global), activation, lr_edges,
                                                  hierarchy, a.min_nodes, &warnings);
    ctxppi::save_bundle(kg, a.common.out);

    if (warnings.self_loops_dropped)
        std::cerr << "warning: dropped " << warnings.self_loops_dropped << " self-loop edges\n";
    if (warnings.unknown_genes_dropped)
        std::cerr << "warning: dropped " << warnings.unknown_genes_dropped
                  << " activated genes missing from the global PPI\n";
    for (const auto& ctx : warnings.rejected_contexts)
        std::cerr << "warning: context '" << ctx << "' rejected (component below "
                  << a.min_nodes << " nodes)\n";
    if (warnings.lr_edges_dropped)
        std::cerr << "warning: dropped " << warnings.lr_edges_dropped
                  << " LR edges touching absent contexts\n";
    std::cout << "bundle written to " << a.common.out << " (" << kg.contexts.size()
              << " contexts)\n";
    return 0;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    CommonOpts common;
    ctxppi::SyntheticSpec spec;
};

int cmd_synth(const SynthArgs& a) {
    const auto bundle = ctxppi::generate_synthetic(a.spec, a.common.seed);
    ctxppi::save_bundle(bundle.kg, a.common.out);
    ctxppi::save_risk_labels(bundle.labels, (fs::path(a.common.out) / "labels.tsv").string());
    write_file(fs::path(a.common.out) / "ground_truth.json", bundle.ground_truth.dump(2) + "\n");
    std::cout << "synthetic bundle written to " << a.common.out << " ("
              << bundle.kg.contexts.size() << " contexts, "
              << bundle.kg.global.n_proteins() << " proteins)\n";
    return 0;
}

// ---- pretrain ---------------------------------------------------------------

struct PretrainArgs {
    CommonOpts common;
    std::string bundle;
    std::string resume;
    ModelFlags model;
    std::size_t epochs = 100;
    double learning_rate = 1e-2;
    double train_ratio = 0.8, valid_ratio = 0.1, test_ratio = 0.1;
    double negative_ratio = 1.0;
};

ctxppi::PretrainOptions to_options(const PretrainArgs& a) {
    ctxppi::PretrainOptions opt;
    opt.model.latent_dim = a.model.latent_dim;
    opt.model.n_protein_layers = a.model.protein_layers;
    opt.model.n_attention_heads = a.model.heads;
    opt.model.n_metagraph_layers = a.model.metagraph_layers;
    opt.model.seed = a.common.seed;
    opt.epochs = a.epochs;
    opt.learning_rate = a.learning_rate;
    opt.ratios = {a.train_ratio, a.valid_ratio, a.test_ratio};
    opt.negative_ratio = a.negative_ratio;
    return opt;
}

int cmd_pretrain(const PretrainArgs& a) {
    require_input_file((fs::path(a.bundle) / "global_ppi.tsv").string(), "bundle");
    const auto kg = ctxppi::load_bundle(a.bundle);
    const auto opt = to_options(a);
    const std::uint64_t sig = ctxppi::fnv1a_hash(ctxppi::train_signature(kg, opt));

    ctxppi::TrainStart start;
    const ctxppi::TrainStart* start_ptr = nullptr;
    if (!a.resume.empty()) {
        require_input_file(a.resume, "checkpoint");
        const auto ckpt = ctxppi::load_checkpoint(a.resume);
        if (ckpt.config_hash != sig)
            throw ctxppi::ResumeMismatch(
                "checkpoint was trained under a different configuration or graph");
        start = ctxppi::restore_state(ckpt, kg).start;
        start_ptr = &start;
        std::cerr << "resuming from epoch " << start.completed_epochs << "\n";
    }

    const auto result = ctxppi::train(kg, opt, start_ptr);

    const auto ckpt = ctxppi::make_checkpoint(result, opt.model, sig);
    fs::create_directories(a.common.out);
    ctxppi::save_checkpoint((fs::path(a.common.out) / "checkpoint.bin").string(), ckpt);
    write_file(fs::path(a.common.out) / "train_report.json",
               ctxppi::train_report_to_json(result.report).dump(2) + "\n");
    write_file(fs::path(a.common.out) / "test_metrics.csv",
               ctxppi::metrics_to_csv(result.report.test_metrics));

    const auto table = ctxppi::forward(kg, result.params, opt.model);
    write_file(fs::path(a.common.out) / "protein_embeddings.tsv",
               ctxppi::protein_embeddings_to_tsv(table));
    write_file(fs::path(a.common.out) / "cell_embeddings.tsv",
               ctxppi::cell_embeddings_to_tsv(table));

    for (const auto& w : result.report.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "wall clock: " << result.report.wall_clock_sec << " s\n";
    std::cout << "pretrained " << result.report.epochs_run << " epochs; best epoch "
              << result.report.best_epoch << " (val AUROC "
              << result.report.best_val_auroc << ")\n";
    return result.report.aborted_non_finite ? 1 : 0;
}

// ---- finetune ---------------------------------------------------------------

struct FinetuneArgs {
    CommonOpts common;
    std::string bundle, checkpoint, labels;
    std::size_t hidden = 32;
    std::size_t epochs = 300;
    double learning_rate = 1e-2;
    double test_fraction = 0.2;
};

int cmd_finetune(const FinetuneArgs& a) {
    require_input_file((fs::path(a.bundle) / "global_ppi.tsv").string(), "bundle");
    require_input_file(a.checkpoint, "checkpoint");
    require_input_file(a.labels, "labels");

    const auto kg = ctxppi::load_bundle(a.bundle);
    const auto st = ctxppi::restore_state(ctxppi::load_checkpoint(a.checkpoint), kg);
    const auto table = ctxppi::forward(kg, st.best_params, st.config);
    const auto labels = ctxppi::load_risk_labels(a.labels);

    const auto ds = ctxppi::build_finetune_dataset(table, labels);
    if (ds.missing_genes)
        std::cerr << "warning: " << ds.missing_genes
                  << " labeled genes have no embedding in any context\n";

    ctxppi::MlpOptions mlp_opt;
    mlp_opt.hidden = a.hidden;
    mlp_opt.epochs = a.epochs;
    mlp_opt.learning_rate = a.learning_rate;
    mlp_opt.test_fraction = a.test_fraction;
    mlp_opt.seed = a.common.seed;
    const auto ft = ctxppi::train_mlp(ds, mlp_opt);

    // Scores for every labeled, embedded (gene, context) pair.
    std::vector<ctxppi::ContextScore> scores;
    std::vector<std::pair<std::string, std::vector<ctxppi::ContextScore>>> rankings;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        scores.push_back(
            {ds.genes[i], ds.context_ids[i], ft.params.score(ds.features.row(i), ds.dim)});
        if (seen.insert(ds.genes[i]).second)
            rankings.push_back({ds.genes[i], ctxppi::rank_contexts(ds.genes[i], table, ft.params)});
    }
    const auto ranking_metrics = ctxppi::eval_test_ranking(table, ds, ft);

    fs::create_directories(a.common.out);
    {
        ctxppi::Checkpoint mlp_ckpt;
        mlp_ckpt.config_hash = ctxppi::fnv1a_hash("mlp;" + std::to_string(a.common.seed));
        auto named = const_cast<ctxppi::MlpParams&>(ft.params).named();
        for (auto& [name, m] : named) mlp_ckpt.matrices.push_back({name, *m});
        ctxppi::save_checkpoint((fs::path(a.common.out) / "mlp.bin").string(), mlp_ckpt);
    }
    write_file(fs::path(a.common.out) / "scores.csv", ctxppi::scores_to_csv(scores));
    write_file(fs::path(a.common.out) / "rankings.json",
               ctxppi::rankings_to_json(rankings).dump(2) + "\n");
    write_file(fs::path(a.common.out) / "eval_ranking.csv",
               ctxppi::ranking_to_csv(ranking_metrics));
    write_file(fs::path(a.common.out) / "finetune_split.json",
               json{{"train_genes", ft.train_genes}, {"test_genes", ft.test_genes}}.dump(2) +
                   "\n");
    std::cout << "fine-tuned on " << ds.size() << " examples (" << ft.train_genes.size()
              << " train genes, " << ft.test_genes.size() << " test genes)\n";
    return 0;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
    CommonOpts common;
    std::string bundle, checkpoint;
    std::vector<std::string> genes;
    bool svg = true;
};

int cmd_analyze(const AnalyzeArgs& a) {
    require_input_file((fs::path(a.bundle) / "global_ppi.tsv").string(), "bundle");
    require_input_file(a.checkpoint, "checkpoint");
    const auto kg = ctxppi::load_bundle(a.bundle);
    const auto st = ctxppi::restore_state(ctxppi::load_checkpoint(a.checkpoint), kg);
    const auto table = ctxppi::forward(kg, st.best_params, st.config);

    fs::create_directories(a.common.out);
    const auto cell_sim = ctxppi::cell_similarity(table);
    write_file(fs::path(a.common.out) / "cell_similarity.csv",
               ctxppi::similarity_to_csv(cell_sim));
    if (a.svg)
        write_file(fs::path(a.common.out) / "cell_similarity.svg",
                   ctxppi::render_svg_heatmap(cell_sim));

    for (const auto& gene : a.genes) {
        try {
            const auto sim = ctxppi::protein_context_similarity(gene, table);
            const std::string base = "gene_" + gene + "_similarity";
            write_file(fs::path(a.common.out) / (base + ".csv"), ctxppi::similarity_to_csv(sim));
            if (a.svg)
                write_file(fs::path(a.common.out) / (base + ".svg"),
                           ctxppi::render_svg_heatmap(sim));
        } catch (const ctxppi::InsufficientContexts& e) {
            std::cerr << "warning: " << e.what() << "\n";
        }
    }

    write_file(fs::path(a.common.out) / "marker_contrast.csv",
               ctxppi::marker_contrast_to_csv(ctxppi::marker_contrast(table)));
    std::cout << "analysis artifacts written to " << a.common.out << "\n";
    return 0;
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
    CommonOpts common;
    std::string bundle, checkpoint, labels;
    std::size_t hidden = 32;
    std::size_t epochs = 300;
    double learning_rate = 1e-2;
    double test_fraction = 0.2;
    std::size_t walks = 10, walk_length = 20, window = 5;
};

int cmd_compare(const CompareArgs& a) {
    require_input_file((fs::path(a.bundle) / "global_ppi.tsv").string(), "bundle");
    require_input_file(a.checkpoint, "checkpoint");
    require_input_file(a.labels, "labels");

    const auto kg = ctxppi::load_bundle(a.bundle);
    const auto st = ctxppi::restore_state(ctxppi::load_checkpoint(a.checkpoint), kg);
    const auto labels = ctxppi::load_risk_labels(a.labels);

    ctxppi::MlpOptions mlp_opt;
    mlp_opt.hidden = a.hidden;
    mlp_opt.epochs = a.epochs;
    mlp_opt.learning_rate = a.learning_rate;
    mlp_opt.test_fraction = a.test_fraction;
    mlp_opt.seed = a.common.seed;

    auto evaluate = [&](const ctxppi::EmbeddingTable& table) {
        const auto ds = ctxppi::build_finetune_dataset(table, labels);
        const auto ft = ctxppi::train_mlp(ds, mlp_opt);
        return ctxppi::eval_test_ranking(table, ds, ft);
    };

    const auto model_metrics = evaluate(ctxppi::forward(kg, st.best_params, st.config));

    ctxppi::RandomWalkOptions rw_opt;
    rw_opt.walks_per_node = a.walks;
    rw_opt.walk_length = a.walk_length;
    rw_opt.window = a.window;
    const auto rw = ctxppi::random_walk_embeddings(kg.global, st.config.latent_dim,
                                                   a.common.seed, rw_opt);
    const auto baseline_metrics = evaluate(ctxppi::table_from_global_embeddings(kg, rw));

    const auto report = ctxppi::compare_models(model_metrics, baseline_metrics);
    fs::create_directories(a.common.out);
    write_file(fs::path(a.common.out) / "comparison.csv", ctxppi::comparison_to_csv(report));
    write_file(fs::path(a.common.out) / "comparison.json",
               ctxppi::comparison_to_json(report).dump(2) + "\n");
    write_file(fs::path(a.common.out) / "model_ranking.csv",
               ctxppi::ranking_to_csv(model_metrics));
    write_file(fs::path(a.common.out) / "baseline_ranking.csv",
               ctxppi::ranking_to_csv(baseline_metrics));
    std::cout << ctxppi::comparison_to_csv(report);
    return 0;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
    CommonOpts common;
    std::string run_dir;
};

int cmd_report(const ReportArgs& a) {
    json report = json::object();
    auto maybe_json = [&](const char* key, const fs::path& p) {
        if (fs::exists(p)) report[key] = json::parse(ctxppi::read_text_file(p.string()));
    };
    auto maybe_csv = [&](const char* key, const fs::path& p) {
        if (fs::exists(p)) report[key] = ctxppi::read_text_file(p.string());
    };
    const fs::path run(a.run_dir);
    maybe_json("summary", run / "summary.json");
    maybe_json("train_report", run / "train_report.json");
    maybe_json("comparison", run / "comparison.json");
    maybe_json("finetune_split", run / "finetune_split.json");
    maybe_csv("test_metrics_csv", run / "test_metrics.csv");
    maybe_csv("eval_ranking_csv", run / "eval_ranking.csv");
    if (report.empty())
        throw ctxppi::ParseError("no recognized artifacts under " + a.run_dir);
    write_file(fs::path(a.common.out) / "report.json", report.dump(2) + "\n");
    std::cout << "aggregated " << report.size() << " artifacts into " << a.common.out
              << "/report.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contextual PPI embedding toolkit"};
    app.require_subcommand(1);

    BuildGraphArgs bg;
    auto* c_bg = app.add_subcommand("build-graph",
                                    "construct the two-level knowledge graph bundle");
    add_common(c_bg, bg.common, /*seed_required=*/false);
    c_bg->add_option("--ppi", bg.ppi, "global PPI TSV")->required();
    c_bg->add_option("--deg", bg.deg, "DEG table TSV")->required();
    c_bg->add_option("--lr", bg.lr, "ligand-receptor table TSV")->required();
    c_bg->add_option("--hierarchy", bg.hierarchy, "subtype->celltype TSV")->required();
    c_bg->add_option("--lr-threshold", bg.lr_threshold, "aggregate rank cutoff");
    c_bg->add_option("--min-nodes", bg.min_nodes, "minimum context component size");

    SynthArgs sy;
    auto* c_sy = app.add_subcommand("synth", "generate a planted-structure synthetic bundle");
    add_common(c_sy, sy.common, true);
    c_sy->add_option("--proteins", sy.spec.n_proteins, "universe size");
    c_sy->add_option("--contexts", sy.spec.n_contexts, "number of cell subtypes");
    c_sy->add_option("--blocks", sy.spec.blocks, "blocks per context");
    c_sy->add_option("--intra", sy.spec.intra_p, "intra-block edge probability");
    c_sy->add_option("--inter", sy.spec.inter_p, "inter-block edge probability");
    c_sy->add_option("--risk-block", sy.spec.risk_block, "planted risk block id");
    c_sy->add_option("--pos-labels", sy.spec.n_pos_labels, "positive label count");
    c_sy->add_option("--neg-labels", sy.spec.n_neg_labels, "negative label count");
    c_sy->add_option("--active-fraction", sy.spec.active_fraction,
                     "fraction of the universe active per context");
    c_sy->add_option("--min-nodes", sy.spec.min_nodes, "minimum context component size");

    PretrainArgs pt;
    auto* c_pt = app.add_subcommand("pretrain", "self-supervised link prediction pretraining");
    add_common(c_pt, pt.common, true);
    c_pt->add_option("--bundle", pt.bundle, "knowledge-graph bundle directory")->required();
    c_pt->add_option("--resume", pt.resume, "checkpoint to resume from");
    add_model_flags(c_pt, pt.model);
    c_pt->add_option("--epochs", pt.epochs, "total training epochs");
    c_pt->add_option("--lr", pt.learning_rate, "Adam learning rate");
    c_pt->add_option("--train-ratio", pt.train_ratio, "train edge fraction");
    c_pt->add_option("--valid-ratio", pt.valid_ratio, "validation edge fraction");
    c_pt->add_option("--test-ratio", pt.test_ratio, "test edge fraction");
    c_pt->add_option("--negative-ratio", pt.negative_ratio, "negatives per positive");

    FinetuneArgs ft;
    auto* c_ft = app.add_subcommand("finetune", "risk-gene classifier on frozen embeddings");
    add_common(c_ft, ft.common, true);
    c_ft->add_option("--bundle", ft.bundle, "knowledge-graph bundle directory")->required();
    c_ft->add_option("--checkpoint", ft.checkpoint, "pretrained checkpoint")->required();
    c_ft->add_option("--labels", ft.labels, "risk label TSV (gene<TAB>label)")->required();
    c_ft->add_option("--hidden", ft.hidden, "MLP hidden width");
    c_ft->add_option("--epochs", ft.epochs, "MLP training epochs");
    c_ft->add_option("--lr", ft.learning_rate, "Adam learning rate");
    c_ft->add_option("--test-fraction", ft.test_fraction, "gene-level test fraction");

    AnalyzeArgs an;
    auto* c_an = app.add_subcommand("analyze", "embedding similarity and marker analytics");
    add_common(c_an, an.common, false);
    c_an->add_option("--bundle", an.bundle, "knowledge-graph bundle directory")->required();
    c_an->add_option("--checkpoint", an.checkpoint, "pretrained checkpoint")->required();
    c_an->add_option("--gene", an.genes, "gene(s) for cross-context similarity heatmaps");
    c_an->add_flag("--svg,!--no-svg", an.svg, "also emit SVG heatmaps");

    CompareArgs cp;
    auto* c_cp = app.add_subcommand("compare",
                                    "contextual model vs random-walk baseline, Table-2 style");
    add_common(c_cp, cp.common, true);
    c_cp->add_option("--bundle", cp.bundle, "knowledge-graph bundle directory")->required();
    c_cp->add_option("--checkpoint", cp.checkpoint, "pretrained checkpoint")->required();
    c_cp->add_option("--labels", cp.labels, "risk label TSV")->required();
    c_cp->add_option("--hidden", cp.hidden, "MLP hidden width");
    c_cp->add_option("--epochs", cp.epochs, "MLP training epochs");
    c_cp->add_option("--lr", cp.learning_rate, "Adam learning rate");
    c_cp->add_option("--test-fraction", cp.test_fraction, "gene-level test fraction");
    c_cp->add_option("--walks", cp.walks, "random walks per node");
    c_cp->add_option("--walk-length", cp.walk_length, "random walk length");
    c_cp->add_option("--window", cp.window, "co-occurrence window");

    ReportArgs rp;
    auto* c_rp = app.add_subcommand("report", "aggregate run artifacts into one report");
    add_common(c_rp, rp.common, false);
    c_rp->add_option("--run", rp.run_dir, "directory holding command outputs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (c_bg->parsed()) return cmd_build_graph(bg);
        if (c_sy->parsed()) return cmd_synth(sy);
        if (c_pt->parsed()) return cmd_pretrain(pt);
        if (c_ft->parsed()) return cmd_finetune(ft);
        if (c_an->parsed()) return cmd_analyze(an);
        if (c_cp->parsed()) return cmd_compare(cp);
        if (c_rp->parsed()) return cmd_report(rp);
    } catch (const ctxppi::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
