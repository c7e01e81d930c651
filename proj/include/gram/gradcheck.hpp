#pragma once

#include <string>
#include <vector>

#include "gram/model.hpp"

namespace gram {

struct GradCheckEntry {
    std::string name;
    double max_err = 0.0;  // relative, absolute below 1e-8 analytic magnitude
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_err = 0.0;
    int64_t elements = 0;
};

// Central finite-difference audit of every registered parameter against the
// reverse-mode gradients of model.loss(ex). weight_scale multiplies non-norm
// weights first so ReLU pre-activations sit away from the kink, where an
// h-step probe would cross it and corrupt the numeric derivative.
GradCheckReport gradcheck_model(GramModel& model, const QaExample& ex, double h = 1e-5,
                                double weight_scale = 9.0);

}  // namespace gram
