#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "theta/design_space.hpp"
#include "theta/envs.hpp"
#include "theta/rng.hpp"
#include "theta/trace.hpp"

namespace theta {

enum class GaOperator { uniform_greedy, normal_greedy, diff_evolution };

GaOperator parse_ga_operator(const std::string& name);
std::string ga_operator_name(GaOperator op);

struct GaConfig {
    std::size_t population_size = 32;
    std::vector<GaOperator> operators{GaOperator::uniform_greedy, GaOperator::normal_greedy,
                                      GaOperator::diff_evolution};
    double bandit_epsilon = 0.1;
    std::uint64_t seed = 0;
    std::uint64_t max_evaluations = 10000;
    Objectives objective_weights{{kDistanceObjective, 1.0}};
    // Operator constants.
    double normal_sigma_fraction = 0.125;  // sigma = d_i * fraction
    double de_weight = 0.5;                // F
    double de_crossover = 0.9;

    void validate() const;
};

nlohmann::json to_json(const GaConfig& cfg);
GaConfig ga_config_from_json(const nlohmann::json& j, GaConfig base = {});

// Produces one child from the operator's parents. Greedy operators read
// parents[0]; differential evolution reads parents[0..2] as (a, b, c).
//   uniform_greedy: redraw one random dimension uniformly.
//   normal_greedy:  shift one random dimension by round(N(0, d_i*fraction)),
//                   never zero when d_i > 1, reflected into range.
//   diff_evolution: child_i = clamp(a_i + round(F (b_i - c_i))) with
//                   probability `de_crossover` per dimension (at least one
//                   dimension always crosses), else a_i.
DesignPoint mutate(const DesignSpace& space, GaOperator op, std::span<const DesignPoint> parents, Rng& rng,
                   const GaConfig& cfg);

// Steady-state GA: one child per step, replacing the worst member when
// better. Emits one trace row per evaluation.
RunResult run_ga(const DesignSpace& space, Environment& env, const GaConfig& cfg);

}  // namespace theta
