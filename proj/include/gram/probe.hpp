#pragma once

#include <cstdint>
#include <vector>

#include "gram/config.hpp"
#include "gram/model.hpp"

namespace gram {

// Bottleneck-probe experiment: train a model whose decoder memory is page 0's
// doc tokens on cross_page_count, with and without doc sub-layers. Counting
// across pages can only reach page 0's doc tokens through the doc sub-layers,
// so the ablated variant is blind to pages >= 1.
struct ProbeConfig {
    GramConfig model;  // bottleneck_probe toy dims; seed is set per run
    TrainConfig train;
    int k_pages = 4;
    int n_text = 16;
    int train_instances = 2000;
    int eval_instances = 300;
    int check_every = 250;        // early-stop cadence
    double stop_train_acc = 0.97;  // probe threshold on the running sample
    int probe_sample = 200;
    uint64_t data_seed = 404;
};

struct ProbeRunResult {
    uint64_t seed = 0;
    bool with_doc = false;
    double train_acc = 0.0;  // full training set, measured at stop
    double eval_acc = 0.0;   // fresh instances
    int steps_run = 0;
};

ProbeRunResult run_probe(const ProbeConfig& pc, uint64_t seed, bool with_doc);

}  // namespace gram
