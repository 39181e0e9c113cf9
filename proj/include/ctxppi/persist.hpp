#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxppi/checkpoint.hpp"
#include "ctxppi/errors.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/model.hpp"
#include "ctxppi/optim.hpp"
#include "ctxppi/pretrain.hpp"
#include "ctxppi/tsv.hpp"

namespace ctxppi {

// Canonical description of everything a resumed run must agree on: model
// shape, seed, optimizer hyperparameters, split protocol and the graph
// itself. The total epoch budget is deliberately excluded so a checkpoint can
// be resumed for more epochs.
inline std::string train_signature(const KnowledgeGraph& kg, const PretrainOptions& opt) {
    std::string s;
    s += "latent_dim=" + std::to_string(opt.model.latent_dim);
    s += ";protein_layers=" + std::to_string(opt.model.n_protein_layers);
    s += ";heads=" + std::to_string(opt.model.n_attention_heads);
    s += ";metagraph_layers=" + std::to_string(opt.model.n_metagraph_layers);
    s += ";seed=" + std::to_string(opt.model.seed);
    s += ";lr=" + fmt_double(opt.learning_rate);
    s += ";ratios=" + fmt_double(opt.ratios.train) + "," + fmt_double(opt.ratios.valid) + "," +
         fmt_double(opt.ratios.test);
    s += ";neg_ratio=" + fmt_double(opt.negative_ratio);
    s += ";graph=" + std::to_string(kg.global.n_proteins()) + "," +
         std::to_string(kg.global.n_edges());
    for (const auto& ctx : kg.contexts)
        s += ";ctx:" + ctx.context_id + "=" + std::to_string(ctx.n_nodes()) + "," +
             std::to_string(ctx.n_edges());
    s += ";mg=" + std::to_string(kg.metagraph.subtype_nodes.size()) + "," +
         std::to_string(kg.metagraph.celltype_nodes.size()) + "," +
         std::to_string(kg.metagraph.subtype_edges.size());
    return s;
}

namespace detail {

inline Matrix model_meta_matrix(const ModelConfig& config) {
    Matrix m(1, 6);
    m.data[0] = static_cast<double>(config.latent_dim);
    m.data[1] = static_cast<double>(config.n_protein_layers);
    m.data[2] = static_cast<double>(config.n_attention_heads);
    m.data[3] = static_cast<double>(config.n_metagraph_layers);
    m.data[4] = static_cast<double>(config.seed & 0xffffffffull);
    m.data[5] = static_cast<double>(config.seed >> 32);
    return m;
}

inline ModelConfig model_config_from_meta(const Matrix& m) {
    if (m.rows != 1 || m.cols != 6) throw CorruptCheckpoint("bad model meta record");
    ModelConfig config;
    config.latent_dim = static_cast<std::size_t>(m.data[0]);
    config.n_protein_layers = static_cast<std::size_t>(m.data[1]);
    config.n_attention_heads = static_cast<std::size_t>(m.data[2]);
    config.n_metagraph_layers = static_cast<std::size_t>(m.data[3]);
    config.seed = static_cast<std::uint64_t>(m.data[4]) |
                  (static_cast<std::uint64_t>(m.data[5]) << 32);
    return config;
}

}  // namespace detail

// The checkpoint stores two parameter sets: `param.*` is the end-of-training
// state needed to resume, `best.*` is the best-validation state used for
// inference.
inline Checkpoint make_checkpoint(const PretrainResult& result, const ModelConfig& config,
                                  std::uint64_t config_hash) {
    Checkpoint ckpt;
    ckpt.config_hash = config_hash;
    ckpt.epoch = static_cast<std::uint32_t>(result.report.epochs_run);
    ckpt.rng_state = result.rng.state();
    ckpt.matrices.push_back({"meta.model", detail::model_meta_matrix(config)});
    const ad::AdamState& adam = result.adam;
    Matrix am(1, 5);
    am.data[0] = adam.lr;
    am.data[1] = adam.beta1;
    am.data[2] = adam.beta2;
    am.data[3] = adam.eps;
    am.data[4] = static_cast<double>(adam.step);
    ckpt.matrices.push_back({"meta.adam", am});
    Matrix bm(1, 2);
    bm.data[0] = static_cast<double>(result.report.best_epoch);
    bm.data[1] = result.report.best_val_auroc;
    ckpt.matrices.push_back({"meta.best", bm});
    const auto last = result.last_params.named();
    const auto best = result.params.named();
    for (std::size_t i = 0; i < last.size(); ++i) {
        ckpt.matrices.push_back({"param." + last[i].first, *last[i].second});
        ckpt.matrices.push_back({"best." + best[i].first, *best[i].second});
        ckpt.matrices.push_back({"adam.m." + last[i].first, adam.m.at(i)});
        ckpt.matrices.push_back({"adam.v." + last[i].first, adam.v.at(i)});
    }
    return ckpt;
}

struct RestoredState {
    ModelConfig config;
    TrainStart start;        // end-of-training state, feeds train() on resume
    ModelParams best_params; // inference parameters
};

// Rebuilds trainable state from a checkpoint. The graph must match the one
// the checkpoint was trained on; shape disagreements are resume errors.
inline RestoredState restore_state(const Checkpoint& ckpt, const KnowledgeGraph& kg) {
    RestoredState st;
    const Matrix* meta = ckpt.find("meta.model");
    if (!meta) throw CorruptCheckpoint("checkpoint lacks model meta record");
    st.config = detail::model_config_from_meta(*meta);
    st.config.validate();
    st.start.params = init_params(st.config, kg);  // shapes only; values overwritten below
    st.start.best_params = st.start.params;

    const Matrix* am = ckpt.find("meta.adam");
    if (!am || am->size() != 5) throw CorruptCheckpoint("checkpoint lacks adam meta record");
    const Matrix* bm = ckpt.find("meta.best");
    if (!bm || bm->size() != 2) throw CorruptCheckpoint("checkpoint lacks best-epoch record");

    st.start.adam.lr = am->data[0];
    st.start.adam.beta1 = am->data[1];
    st.start.adam.beta2 = am->data[2];
    st.start.adam.eps = am->data[3];
    st.start.adam.step = static_cast<std::uint64_t>(am->data[4]);
    st.start.best_epoch = static_cast<std::size_t>(bm->data[0]);
    st.start.best_val = st.start.best_epoch > 0 ? bm->data[1] : -1.0;
    st.start.has_best = st.start.best_epoch > 0;

    auto last = st.start.params.named();
    auto best = st.start.best_params.named();
    for (std::size_t i = 0; i < last.size(); ++i) {
        const std::string& name = last[i].first;
        const Matrix* p = ckpt.find("param." + name);
        const Matrix* b = ckpt.find("best." + name);
        const Matrix* m = ckpt.find("adam.m." + name);
        const Matrix* v = ckpt.find("adam.v." + name);
        if (!p || !b || !m || !v)
            throw ResumeMismatch("checkpoint missing matrices for parameter '" + name + "'");
        if (!p->same_shape(*last[i].second))
            throw ResumeMismatch("parameter '" + name + "' has shape " + p->shape_str() +
                                 " but the current graph/config needs " +
                                 last[i].second->shape_str());
        *last[i].second = *p;
        *best[i].second = *b;
        st.start.adam.m.push_back(*m);
        st.start.adam.v.push_back(*v);
    }
    st.start.rng.set_state(ckpt.rng_state);
    st.start.completed_epochs = ckpt.epoch;
    st.best_params = st.start.has_best ? st.start.best_params : st.start.params;
    return st;
}

}  // namespace ctxppi
