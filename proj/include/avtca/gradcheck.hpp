#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "avtca/errors.hpp"
#include "avtca/params.hpp"
#include "avtca/tensor.hpp"

namespace avtca {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    // Per-parameter maxima, registration order.
    std::vector<std::pair<std::string, double>> per_param;
};

// Compares the reverse-mode gradient of the scalar f() against central
// differences (f(x+e) - f(x-e)) / 2e for every element of every listed
// parameter. f must be deterministic (eval-mode dropout or a fixed mask)
// and should run in 64-bit scalars; finite differences drown in f32 noise.
// Throws GradCheckFailure when the worst relative error exceeds tolerance.
template <typename S>
GradCheckReport grad_check(const std::function<Tensor<S>()>& f,
                           const std::vector<std::shared_ptr<Parameter<S>>>& params,
                           double epsilon, double tolerance) {
    for (auto& p : params) p->value.zero_grad();
    Tensor<S> loss = f();
    backward(loss);

    std::vector<std::vector<S>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) {
        if (p->value.grad().size() != p->value.data().size()) {
            // Parameter unused by f: gradient is identically zero.
            analytic.emplace_back(p->value.data().size(), S(0));
        } else {
            analytic.push_back(p->value.grad());
        }
    }

    GradCheckReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto& value = p->value.mutable_data();
        double param_max = 0.0;
        for (size_t i = 0; i < value.size(); ++i) {
            const S saved = value[i];
            value[i] = saved + static_cast<S>(epsilon);
            const double up = static_cast<double>(f().item());
            value[i] = saved - static_cast<S>(epsilon);
            const double down = static_cast<double>(f().item());
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = static_cast<double>(analytic[pi][i]);
            const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > param_max) param_max = rel;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p->name;
                report.worst_index = static_cast<int64_t>(i);
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
        report.per_param.emplace_back(p->name, param_max);
    }

    if (report.max_rel_err > tolerance)
        throw GradCheckFailure(
            "parameter " + report.worst_param + "[" + std::to_string(report.worst_index) +
            "]: analytic " + std::to_string(report.worst_analytic) + " vs central difference " +
            std::to_string(report.worst_numeric) + ", rel err " +
            std::to_string(report.max_rel_err) + " > " + std::to_string(tolerance));
    return report;
}

}  // namespace avtca
