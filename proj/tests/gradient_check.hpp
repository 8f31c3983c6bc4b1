#pragma once

// Central finite-difference oracle for gradient checks. Works on the loss
// values alone, so it stays independent of the analytic backprop path.

#include <cmath>
#include <vector>

#include "poisonlab/objective.hpp"

namespace poisonlab::testing {

struct FdReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

inline FdReport finite_difference_check(const Classifier& model, const Dataset& data,
                                        std::span<const int> indices,
                                        std::span<const LossTerm> terms,
                                        const std::vector<std::vector<double>>* targets = nullptr,
                                        double h = 1e-5) {
    const ObjectiveResult analytic = loss_and_grads(model, data, indices, terms, targets);
    FdReport report;
    Classifier probe = model;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto check_param = [&](std::vector<double>& params, const std::vector<double>& grads) {
            for (std::size_t k = 0; k < params.size(); ++k) {
                const double saved = params[k];
                params[k] = saved + h;
                const double up = loss_value(probe, data, indices, terms, targets);
                params[k] = saved - h;
                const double down = loss_value(probe, data, indices, terms, targets);
                params[k] = saved;
                const double numeric = (up - down) / (2.0 * h);
                report.max_rel_err = std::max(report.max_rel_err, rel_err(grads[k], numeric));
                ++report.checked;
            }
        };
        check_param(probe.layers[l].weights, analytic.grads.layers[l].weights);
        check_param(probe.layers[l].bias, analytic.grads.layers[l].bias);
    }
    return report;
}

}  // namespace poisonlab::testing
