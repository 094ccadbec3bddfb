#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "theta/diff/ops.hpp"
#include "theta/diff/tensor.hpp"
#include "theta/rng.hpp"

namespace testing {

using theta::diff::Shape;
using theta::diff::Tensor;

inline Tensor random_tensor(Shape shape, theta::Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
    std::vector<double> v(theta::diff::shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(std::move(shape), std::move(v), grad);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

// Largest relative error between backward() gradients and central
// differences of `loss` with respect to every entry of every input.
inline double max_grad_error(std::vector<Tensor> inputs, const std::function<Tensor()>& loss, double h = 1e-5) {
    for (auto& t : inputs) t.zero_grad();
    Tensor l = loss();
    l.backward();
    std::vector<std::vector<double>> analytic;
    for (auto& t : inputs) {
        if (t.has_grad()) {
            analytic.emplace_back(t.grad().begin(), t.grad().end());
        } else {
            analytic.emplace_back(t.numel(), 0.0);
        }
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto vals = inputs[k].mutable_values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + h;
            const double up = loss().item();
            vals[i] = orig - h;
            const double down = loss().item();
            vals[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[k][i];
            const double err = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// Weighted sum that turns any tensor into a scalar with a generic gradient.
inline Tensor probe_sum(const Tensor& x, std::uint64_t seed = 99) {
    theta::Rng rng(seed);
    Tensor w = random_tensor(x.shape(), rng, -1.0, 1.0, false);
    return theta::diff::sum(theta::diff::mul(x, w));
}

}  // namespace testing
