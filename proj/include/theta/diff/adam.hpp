#pragma once

#include <cstdint>
#include <vector>

#include "theta/diff/tensor.hpp"

namespace theta::diff {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step_count = 0;
    AdamOptions options;
};

// Bias-corrected Adam over a fixed parameter list.
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   w <- w - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamOptions options);

    // Applies one update from the current grads, then zeroes them.
    // Throws UsageError if any parameter has no gradient.
    void step();
    void zero_grad();

    const AdamState& state() const { return state_; }
    void set_learning_rate(double lr) { state_.options.learning_rate = lr; }

private:
    std::vector<Tensor> params_;
    AdamState state_;
};

}  // namespace theta::diff
