#include "theta/diff/adam.hpp"

#include <cmath>

#include "theta/errors.hpp"

namespace theta::diff {

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)) {
    if (!(options.learning_rate > 0.0)) {
        throw ConfigError("adam: learning rate must be positive");
    }
    if (!(options.beta1 > 0.0 && options.beta1 < 1.0) || !(options.beta2 > 0.0 && options.beta2 < 1.0)) {
        throw ConfigError("adam: betas must lie in (0,1)");
    }
    if (!(options.epsilon > 0.0)) {
        throw ConfigError("adam: epsilon must be positive");
    }
    state_.options = options;
    for (const auto& p : params_) {
        if (!p.requires_grad()) {
            throw ConfigError("adam: parameter does not require grad");
        }
        state_.first_moment.emplace_back(p.numel(), 0.0);
        state_.second_moment.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    for (const auto& p : params_) {
        if (!p.has_grad()) {
            throw UsageError("adam: parameter of shape " + shape_str(p.shape()) + " has no gradient");
        }
    }
    const auto& o = state_.options;
    ++state_.step_count;
    const double t = static_cast<double>(state_.step_count);
    const double lr_hat = o.learning_rate / (1.0 - std::pow(o.beta1, t));
    const double inv_sqrt_bias2 = 1.0 / std::sqrt(1.0 - std::pow(o.beta2, t));
    const double b1 = o.beta1;
    const double b2 = o.beta2;
    const double eps = o.epsilon;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        const std::size_t n = params_[k].numel();
        double* __restrict w = params_[k].mutable_values().data();
        const double* __restrict g = params_[k].grad().data();
        double* __restrict m = state_.first_moment[k].data();
        double* __restrict v = state_.second_moment[k].data();
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr_hat * m[i] / (std::sqrt(v[i]) * inv_sqrt_bias2 + eps);
        }
    }
    zero_grad();
}

void Adam::zero_grad() {
    for (auto& p : params_) {
        p.zero_grad();
    }
}

}  // namespace theta::diff
