#include "theta/resonance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "theta/diff/adam.hpp"
#include "theta/diff/ops.hpp"

namespace theta {

using diff::Tensor;
using nlohmann::json;

void HyperParams::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("hyper-parameters: " + msg); };
    if (objective_weights.empty()) fail("objective_weights must name at least one objective");
    for (const auto& [name, w] : objective_weights) {
        if (!std::isfinite(w)) fail("weight for '" + name + "' is not finite");
    }
    if (!(alpha_renew > 0.0 && alpha_renew <= 1.0)) fail("alpha_renew must lie in (0,1]");
    if (!(beta_kl >= 0.0)) fail("beta_kl must be non-negative");
    if (!(beta_e0 >= 0.0) || !(beta_min >= 0.0)) fail("entropy betas must be non-negative");
    if (beta_min > beta_e0) fail("beta_min must not exceed beta_e0");
    if (!(r_decay > 0.0 && r_decay <= 1.0)) fail("r_decay must lie in (0,1]");
    if (!(alpha_anomaly >= 0.0)) fail("alpha_anomaly must be non-negative");
    if (batch_size == 0 || minibatch_size == 0 || epochs == 0) fail("batch, mini-batch and epoch counts must be positive");
    if (minibatch_size > batch_size || batch_size % minibatch_size != 0) fail("minibatch_size must divide batch_size");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (max_evaluations == 0) fail("max_evaluations must be positive");
}

json to_json(const HyperParams& hp) {
    return {{"objective_weights", hp.objective_weights},
            {"alpha_renew", hp.alpha_renew},
            {"beta_kl", hp.beta_kl},
            {"beta_e0", hp.beta_e0},
            {"beta_min", hp.beta_min},
            {"r_decay", hp.r_decay},
            {"alpha_anomaly", hp.alpha_anomaly},
            {"batch_size", hp.batch_size},
            {"minibatch_size", hp.minibatch_size},
            {"epochs", hp.epochs},
            {"learning_rate", hp.learning_rate},
            {"alpha_mode", hp.alpha_mode == AlphaMode::uniform_one ? "uniform-one" : "log-normalized"},
            {"max_evaluations", hp.max_evaluations}};
}

HyperParams hyper_params_from_json(const json& j, HyperParams hp) {
    if (!j.is_object()) {
        throw ConfigError("hyper-parameters must be a JSON object");
    }
    static const std::set<std::string> known{"objective_weights", "alpha_renew",   "beta_kl",        "beta_e0",
                                             "beta_min",          "r_decay",       "alpha_anomaly",  "batch_size",
                                             "minibatch_size",    "epochs",        "learning_rate",  "alpha_mode",
                                             "max_evaluations"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown hyper-parameter '" + key + "'");
        }
    }
    try {
        if (j.contains("objective_weights")) hp.objective_weights = j["objective_weights"].get<Objectives>();
        hp.alpha_renew = j.value("alpha_renew", hp.alpha_renew);
        hp.beta_kl = j.value("beta_kl", hp.beta_kl);
        hp.beta_e0 = j.value("beta_e0", hp.beta_e0);
        hp.beta_min = j.value("beta_min", hp.beta_min);
        hp.r_decay = j.value("r_decay", hp.r_decay);
        hp.alpha_anomaly = j.value("alpha_anomaly", hp.alpha_anomaly);
        hp.batch_size = j.value("batch_size", hp.batch_size);
        hp.minibatch_size = j.value("minibatch_size", hp.minibatch_size);
        hp.epochs = j.value("epochs", hp.epochs);
        hp.learning_rate = j.value("learning_rate", hp.learning_rate);
        hp.max_evaluations = j.value("max_evaluations", hp.max_evaluations);
        if (j.contains("alpha_mode")) {
            const auto mode = j["alpha_mode"].get<std::string>();
            if (mode == "uniform-one") {
                hp.alpha_mode = AlphaMode::uniform_one;
            } else if (mode == "log-normalized") {
                hp.alpha_mode = AlphaMode::log_normalized;
            } else {
                throw ConfigError("alpha_mode must be uniform-one or log-normalized");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("hyper-parameters: ") + e.what());
    }
    return hp;
}

double update_running_reward(RunningState& state, double batch_mean, double alpha_renew) {
    state.running_reward = alpha_renew * batch_mean + (1.0 - alpha_renew) * state.running_reward;
    state.initialized = true;
    return state.running_reward;
}

std::vector<double> advantages(std::span<const double> rewards, double running_reward) {
    std::vector<double> out(rewards.size());
    for (std::size_t b = 0; b < rewards.size(); ++b) {
        out[b] = rewards[b] - running_reward;
    }
    return out;
}

AnomalyReward anomaly_reward(std::span<const double> ok_rewards, double running_reward, double alpha_anomaly) {
    if (ok_rewards.empty()) {
        return {running_reward - alpha_anomaly * std::max(std::abs(running_reward), 1.0), true};
    }
    const double mean = std::accumulate(ok_rewards.begin(), ok_rewards.end(), 0.0) / static_cast<double>(ok_rewards.size());
    const double penalty = alpha_anomaly * std::abs(mean);
    return {std::min(mean - penalty, running_reward - penalty), false};
}

SurrogateLoss surrogate_loss(const PolicyOutput& current, const PolicyOutput& old, const SampleBatch& batch,
                             std::span<const std::size_t> members, std::span<const double> adv, const HyperParams& hp,
                             double beta_e) {
    if (members.empty()) {
        throw UsageError("surrogate loss over an empty mini-batch");
    }
    std::vector<Tensor> weighted;
    weighted.reserve(members.size());
    for (std::size_t b : members) {
        const auto& old_lp = batch.old_log_probs.at(b);
        const double old_sum = std::accumulate(old_lp.begin(), old_lp.end(), 0.0);
        Tensor delta = diff::sub(log_prob(current, batch.designs.at(b)), Tensor::scalar(old_sum));
        Tensor ratio = diff::exp(diff::clamp(delta, -kLogRatioClamp, kLogRatioClamp));
        weighted.push_back(diff::scale(ratio, adv[b]));
    }
    Tensor l_u = diff::scale(diff::add_n(weighted), -1.0 / static_cast<double>(members.size()));
    Tensor l_kl = diff::scale(diff::add_n(kl_rev_terms(current, old)), hp.beta_kl);
    Tensor l_e = diff::scale(diff::add_n(entropy_terms(current, hp.alpha_mode)), -beta_e);
    const std::vector<Tensor> parts{l_u, l_kl, l_e};
    SurrogateLoss loss;
    loss.total = diff::add_n(parts);
    loss.update = l_u.item();
    loss.kl = l_kl.item();
    loss.entropy = l_e.item();
    return loss;
}

SurrogateLoss surrogate_loss(const PolicyNet& net, const PolicyOutput& old, const SampleBatch& batch,
                             std::span<const std::size_t> members, std::span<const double> adv, const HyperParams& hp,
                             double beta_e) {
    return surrogate_loss(net.forward(), old, batch, members, adv, hp, beta_e);
}

double decay_entropy_beta(RunningState& state, const HyperParams& hp) {
    state.beta_e = std::max(hp.beta_min, state.beta_e * hp.r_decay);
    return state.beta_e;
}

namespace {

// Fisher-Yates with the engine's own index draw.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.index(i)]);
    }
}

}  // namespace

TrainResult train(const DesignSpace& space, PolicyNet& net, Environment& env, const HyperParams& hp,
                  std::uint64_t seed, const TrainOptions& options) {
    hp.validate();
    if (env.space().cardinalities() != space.cardinalities()) {
        throw ConfigError("environment space does not match the training space");
    }
    if (net.layout().segments != space.output_layout().segments) {
        throw ConfigError("policy network layout does not match the design space");
    }

    Rng root(seed);
    Rng sample_rng = root.split(1);
    Rng shuffle_rng = root.split(2);
    diff::Adam adam(net.parameters(), {.learning_rate = hp.learning_rate});

    RunningState state;
    state.beta_e = hp.beta_e0;
    TrainResult result;

    while (state.evaluations_used < hp.max_evaluations) {
        const std::size_t count =
            static_cast<std::size_t>(std::min<std::uint64_t>(hp.batch_size, hp.max_evaluations - state.evaluations_used));

        // Snapshot theta_old and sample from it.
        const PolicyOutput old = net.forward().detach();
        SampleBatch batch;
        batch.designs = sample_designs(old, count, sample_rng);
        for (const auto& x : batch.designs) {
            std::vector<double> lp(x.indices.size());
            for (std::size_t i = 0; i < lp.size(); ++i) {
                lp[i] = old.log_probs[i].at(x.indices[i]);
            }
            batch.old_log_probs.push_back(std::move(lp));
        }

        try {
            batch.results = env.evaluate_batch(batch.designs);
        } catch (const EnvironmentFailure& e) {
            result.best_design = state.best_design;
            result.best_reward = state.best_reward;
            result.evaluations = state.evaluations_used;
            throw RunAborted(std::string("environment failure: ") + e.what(), std::move(result));
        }
        state.evaluations_used += count;

        // Scalarize; anomalies get R_a once the successful rewards are known.
        std::vector<double> ok_rewards;
        batch.rewards.assign(count, 0.0);
        batch.anomaly_flags.assign(count, true);
        for (std::size_t b = 0; b < count; ++b) {
            if (batch.results[b].is_anomaly()) {
                continue;
            }
            if (auto r = weighted_reward(batch.results[b].objectives(), hp.objective_weights)) {
                batch.rewards[b] = *r;
                batch.anomaly_flags[b] = false;
                ok_rewards.push_back(*r);
                if (*r > state.best_reward) {
                    state.best_reward = *r;
                    state.best_design = batch.designs[b];
                }
            }
        }
        const std::size_t anomaly_count = count - ok_rewards.size();
        double ok_mean = 0.0;
        if (!ok_rewards.empty()) {
            ok_mean = std::accumulate(ok_rewards.begin(), ok_rewards.end(), 0.0) / static_cast<double>(ok_rewards.size());
        }
        if (anomaly_count > 0) {
            // Before the baseline exists, the batch's own mean stands in for it.
            const double baseline = state.initialized ? state.running_reward : ok_mean;
            const AnomalyReward ra = anomaly_reward(ok_rewards, baseline, hp.alpha_anomaly);
            if (ra.fallback) {
                result.warnings.push_back("cycle " + std::to_string(state.cycle) +
                                          ": every sample anomalous, using fallback anomaly reward");
            }
            for (std::size_t b = 0; b < count; ++b) {
                if (batch.anomaly_flags[b]) {
                    batch.rewards[b] = ra.value;
                }
            }
        }

        const double batch_mean =
            std::accumulate(batch.rewards.begin(), batch.rewards.end(), 0.0) / static_cast<double>(count);
        if (!state.initialized) {
            update_running_reward(state, batch_mean, 1.0);
        } else {
            update_running_reward(state, batch_mean, hp.alpha_renew);
        }
        const std::vector<double> adv = advantages(batch.rewards, state.running_reward);

        // Proximal update: epochs over shuffled mini-batches.
        double sum_u = 0.0;
        double sum_kl = 0.0;
        double sum_e = 0.0;
        std::size_t updates = 0;
        std::vector<std::size_t> order(count);
        std::iota(order.begin(), order.end(), 0);
        try {
            for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
                shuffle(order, shuffle_rng);
                for (std::size_t start = 0; start < count; start += hp.minibatch_size) {
                    const std::size_t len = std::min(hp.minibatch_size, count - start);
                    std::span<const std::size_t> members(order.data() + start, len);
                    SurrogateLoss loss = surrogate_loss(net, old, batch, members, adv, hp, state.beta_e);
                    loss.total.backward();
                    adam.step();
                    sum_u += loss.update;
                    sum_kl += loss.kl;
                    sum_e += loss.entropy;
                    ++updates;
                }
            }
        } catch (const NumericError& e) {
            adam.zero_grad();
            result.warnings.push_back("cycle " + std::to_string(state.cycle) + ": update aborted: " + e.what());
        }

        TraceRow row;
        row.cycle = state.cycle;
        row.evaluations = state.evaluations_used;
        row.batch_mean_reward = batch_mean;
        row.running_reward = state.running_reward;
        row.best_reward = state.best_reward;
        row.beta_e = state.beta_e;
        if (updates > 0) {
            row.loss_u = sum_u / static_cast<double>(updates);
            row.loss_kl = sum_kl / static_cast<double>(updates);
            row.loss_e = sum_e / static_cast<double>(updates);
        }
        row.anomaly_count = anomaly_count;
        result.trace.rows.push_back(row);
        if (options.on_cycle) {
            options.on_cycle(row);
        }

        decay_entropy_beta(state, hp);
        ++state.cycle;
    }

    result.best_design = state.best_design;
    result.best_reward = state.best_reward;
    result.evaluations = state.evaluations_used;
    return result;
}

}  // namespace theta
