#pragma once

// Shared helpers for the unit suites.

#include <cmath>
#include <memory>
#include <vector>

#include "avtca/ops.hpp"
#include "avtca/params.hpp"
#include "avtca/rng.hpp"
#include "avtca/tensor.hpp"

namespace testutil {

template <typename S>
avtca::Tensor<S> random_tensor(avtca::Shape shape, avtca::RngState& rng, double lo = -1.0,
                               double hi = 1.0) {
    std::vector<S> data(static_cast<size_t>(avtca::numel(shape)));
    for (auto& v : data) v = static_cast<S>(rng.uniform(lo, hi));
    return avtca::Tensor<S>::from(std::move(shape), std::move(data));
}

template <typename S>
std::shared_ptr<avtca::Parameter<S>> random_param(const std::string& name, avtca::Shape shape,
                                                  avtca::RngState& rng, double lo = -1.0,
                                                  double hi = 1.0) {
    auto p = std::make_shared<avtca::Parameter<S>>();
    p->name = name;
    p->value = random_tensor<S>(std::move(shape), rng, lo, hi);
    p->value.set_requires_grad(true);
    return p;
}

// Scalar projection of an op output: dot with fixed coefficients so every
// output element influences the loss.
template <typename S>
avtca::Tensor<S> dot_with(const avtca::Tensor<S>& x, const avtca::Tensor<S>& coeffs) {
    return avtca::ops::sum_all(avtca::ops::mul(x, coeffs));
}

template <typename S>
bool approx_equal(const avtca::Tensor<S>& a, const std::vector<S>& expect, double tol) {
    if (a.data().size() != expect.size()) return false;
    for (size_t i = 0; i < expect.size(); ++i)
        if (std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(expect[i])) > tol)
            return false;
    return true;
}

}  // namespace testutil
