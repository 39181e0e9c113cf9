#pragma once

// Contextual PPI embedding toolkit: two-level knowledge graph construction,
// attention-based message passing with a unified latent space, self-supervised
// link prediction pretraining, risk-gene fine-tuning, and embedding analytics.

#include "ctxppi/analysis.hpp"
#include "ctxppi/autodiff.hpp"
#include "ctxppi/bundle.hpp"
#include "ctxppi/checkpoint.hpp"
#include "ctxppi/errors.hpp"
#include "ctxppi/finetune.hpp"
#include "ctxppi/graph.hpp"
#include "ctxppi/matrix.hpp"
#include "ctxppi/metrics.hpp"
#include "ctxppi/model.hpp"
#include "ctxppi/optim.hpp"
#include "ctxppi/persist.hpp"
#include "ctxppi/pretrain.hpp"
#include "ctxppi/random_walk.hpp"
#include "ctxppi/reports.hpp"
#include "ctxppi/rng.hpp"
#include "ctxppi/svg.hpp"
#include "ctxppi/synth.hpp"
#include "ctxppi/tsv.hpp"
