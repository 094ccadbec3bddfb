#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "theta/design_space.hpp"
#include "theta/diff/tensor.hpp"
#include "theta/envs.hpp"
#include "theta/errors.hpp"
#include "theta/policy.hpp"
#include "theta/trace.hpp"

namespace theta {

struct HyperParams {
    Objectives objective_weights{{kDistanceObjective, 1.0}};
    double alpha_renew = 0.3;
    double beta_kl = 1.0;
    double beta_e0 = 0.05;
    double beta_min = 0.0;
    double r_decay = 0.999;
    double alpha_anomaly = 0.1;
    std::size_t batch_size = 8;
    std::size_t minibatch_size = 8;
    std::size_t epochs = 4;
    double learning_rate = 1e-3;
    AlphaMode alpha_mode = AlphaMode::uniform_one;
    std::uint64_t max_evaluations = 10000;

    // Throws ConfigError on any out-of-range field.
    void validate() const;
};

nlohmann::json to_json(const HyperParams& hp);
// Unknown keys are rejected; missing keys keep `base` values.
HyperParams hyper_params_from_json(const nlohmann::json& j, HyperParams base = {});

struct RunningState {
    bool initialized = false;
    double running_reward = 0.0;
    double beta_e = 0.0;
    std::uint64_t cycle = 0;
    double best_reward = -std::numeric_limits<double>::infinity();
    DesignPoint best_design;
    std::uint64_t evaluations_used = 0;
};

struct SampleBatch {
    std::vector<DesignPoint> designs;
    std::vector<EvalResult> results;
    std::vector<double> rewards;
    std::vector<bool> anomaly_flags;
    // old_log_probs[b][i] = log f_i(x_bi) under the cycle's snapshot.
    std::vector<std::vector<double>> old_log_probs;

    std::size_t size() const { return designs.size(); }
};

// Exponential moving average of batch means; stores and returns the new value.
double update_running_reward(RunningState& state, double batch_mean, double alpha_renew);

std::vector<double> advantages(std::span<const double> rewards, double running_reward);

struct AnomalyReward {
    double value;
    bool fallback;  // no successful sample in the batch
};

// min(mean - a|mean|, R - a|mean|) over the batch's successful rewards.
// With no successful rewards: R - a * max(|R|, 1), flagged as fallback.
AnomalyReward anomaly_reward(std::span<const double> ok_rewards, double running_reward, double alpha_anomaly);

struct SurrogateLoss {
    diff::Tensor total;
    double update = 0.0;   // L_u
    double kl = 0.0;       // L_KL
    double entropy = 0.0;  // L_e
};

inline constexpr double kLogRatioClamp = 30.0;

// L_u + L_e + L_KL over the selected samples; gradients flow to the
// network only (advantages and snapshot log-probs are constants).
SurrogateLoss surrogate_loss(const PolicyNet& net, const PolicyOutput& old, const SampleBatch& batch,
                             std::span<const std::size_t> members, std::span<const double> advantages,
                             const HyperParams& hp, double beta_e);

// Same, against an already computed forward pass.
SurrogateLoss surrogate_loss(const PolicyOutput& current, const PolicyOutput& old, const SampleBatch& batch,
                             std::span<const std::size_t> members, std::span<const double> advantages,
                             const HyperParams& hp, double beta_e);

double decay_entropy_beta(RunningState& state, const HyperParams& hp);

using TrainResult = RunResult;

struct TrainOptions {
    std::function<void(const TraceRow&)> on_cycle;
};

TrainResult train(const DesignSpace& space, PolicyNet& net, Environment& env, const HyperParams& hp,
                  std::uint64_t seed, const TrainOptions& options = {});

}  // namespace theta
