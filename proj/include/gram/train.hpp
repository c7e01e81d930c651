#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gram/config.hpp"
#include "gram/model.hpp"

namespace gram {

// Doc sub-layers, doc bank and C-Former are the newly initialized path and
// train at their own learning rate; everything else is the base path.
bool is_new_path_param(const std::string& name);

// Decoupled weight decay Adam over a parameter registry.
class AdamW {
public:
    AdamW(ParamRegistry& reg, const TrainConfig& tc);
    // lr factor scales both group learning rates (warmup/decay schedule)
    void step(double lr_factor);

private:
    ParamRegistry& reg_;
    TrainConfig tc_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
    std::vector<double> group_lr_;
};

struct StepRecord {
    int step;
    double loss;
    double lr;       // base-group learning rate after scheduling
    double wall_ms;  // measured, excluded from determinism guarantees
};

struct TrainResult {
    std::vector<StepRecord> steps;
    size_t warning_count = 0;
};

// Deterministic training loop: per step, draw batch_size examples from the
// seeded stream, average their losses, backprop, AdamW update. Non-finite
// loss aborts with TrainDivergence naming the step. A truthy return from
// on_step stops training after that step.
TrainResult train_model(GramModel& model, const std::vector<QaExample>& dataset,
                        const TrainConfig& tc,
                        const std::function<bool(const StepRecord&)>& on_step = nullptr);

// Greedy-decode exact-match accuracy over a dataset.
double exact_match_accuracy(const GramModel& model, const std::vector<QaExample>& dataset);

}  // namespace gram
