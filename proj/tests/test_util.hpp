#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gram/tensor.hpp"

namespace gram::testutil {

// |analytic - numeric| relative to the larger magnitude; values below the
// floor are compared absolutely.
inline double grad_err(double analytic, double numeric, double abs_floor = 1e-8) {
    const double diff = std::fabs(analytic - numeric);
    if (std::fabs(analytic) < abs_floor) return diff;
    return diff / std::max(std::fabs(analytic), std::fabs(numeric));
}

// Central finite-difference audit. loss_fn must rebuild the graph from the
// leaves' current data on every call; returns the worst error over all leaf
// elements.
inline double fd_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                       double h = 1e-5) {
    for (auto& l : leaves) {
        l.set_requires_grad(true);
        l.zero_grad();
    }
    Tensor loss = loss_fn();
    loss.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& l : leaves)
        analytic.push_back(l.has_grad() ? l.grad() : std::vector<double>(l.size(), 0.0));

    double worst = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        for (int64_t i = 0; i < leaf.size(); ++i) {
            const double orig = leaf.data()[i];
            double fplus, fminus;
            {
                NoGradGuard ng;
                leaf.data()[i] = orig + h;
                fplus = loss_fn().value();
                leaf.data()[i] = orig - h;
                fminus = loss_fn().value();
                leaf.data()[i] = orig;
            }
            const double numeric = (fplus - fminus) / (2.0 * h);
            worst = std::max(worst, grad_err(analytic[li][i], numeric));
        }
    }
    return worst;
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline bool all_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::fabs(a[i] - b[i]) > tol) return false;
    return true;
}

inline bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace gram::testutil
