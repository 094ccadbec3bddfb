#include "theta/envs.hpp"

#include <cmath>
#include <cstdlib>

#include "theta/errors.hpp"
#include "theta/rng.hpp"

namespace theta {

std::vector<EvalResult> Environment::evaluate_batch(std::span<const DesignPoint> designs) {
    std::vector<EvalResult> out;
    out.reserve(designs.size());
    for (const auto& d : designs) {
        out.push_back(evaluate(d));
    }
    return out;
}

DistanceKind parse_distance_kind(const std::string& text) {
    if (text == "l1" || text == "l1-index") {
        return DistanceKind::l1_index;
    }
    if (text == "hamming") {
        return DistanceKind::hamming;
    }
    throw ConfigError("unknown distance kind '" + text + "' (expected l1 or hamming)");
}

std::string distance_kind_name(DistanceKind kind) { return kind == DistanceKind::l1_index ? "l1" : "hamming"; }

SyntheticSpec SyntheticSpec::uniform(std::size_t dims, std::size_t choices, DistanceKind distance,
                                     std::uint64_t seed) {
    return {std::vector<std::size_t>(dims, choices), distance, seed};
}

SyntheticEnvironment::SyntheticEnvironment(SyntheticSpec spec)
    : SyntheticEnvironment(DesignSpace::from_cardinalities(spec.cardinalities), spec.distance, spec.seed) {}

SyntheticEnvironment::SyntheticEnvironment(DesignSpace space, DistanceKind distance, std::uint64_t seed)
    : space_(std::move(space)), distance_(distance) {
    Rng rng(seed);
    for (std::size_t d : space_.cardinalities()) {
        optimum_.indices.push_back(rng.index(d));
    }
}

double SyntheticEnvironment::distance(const DesignPoint& design) const {
    space_.validate(design);
    double total = 0.0;
    for (std::size_t i = 0; i < design.indices.size(); ++i) {
        const auto a = static_cast<long long>(design.indices[i]);
        const auto b = static_cast<long long>(optimum_.indices[i]);
        if (distance_ == DistanceKind::l1_index) {
            total += static_cast<double>(std::llabs(a - b));
        } else {
            total += a == b ? 0.0 : 1.0;
        }
    }
    return total;
}

EvalResult SyntheticEnvironment::evaluate(const DesignPoint& design) {
    return EvalResult::ok({{kDistanceObjective, -distance(design)}});
}

FunctionEnvironment::FunctionEnvironment(DesignSpace space, Fn fn, std::optional<double> optimum)
    : space_(std::move(space)), fn_(std::move(fn)), optimum_(optimum) {}

std::optional<double> weighted_reward(const Objectives& objectives, const Objectives& weights) {
    double total = 0.0;
    for (const auto& [name, w] : weights) {
        auto it = objectives.find(name);
        if (it == objectives.end()) {
            return std::nullopt;
        }
        total += w * it->second;
    }
    if (!std::isfinite(total)) {
        return std::nullopt;
    }
    return total;
}

BruteForceResult brute_force_optimum(Environment& env, const Objectives& weights) {
    const DesignSpace& space = env.space();
    if (space.space_size() > kBruteForceLimit) {
        throw ConfigError("space of " + std::to_string(space.space_size()) + " points is too large to enumerate");
    }
    const auto cards = space.cardinalities();
    DesignPoint x{std::vector<std::size_t>(cards.size(), 0)};
    std::optional<BruteForceResult> best;
    while (true) {
        const EvalResult r = env.evaluate(x);
        if (!r.is_anomaly()) {
            if (auto reward = weighted_reward(r.objectives(), weights); reward && (!best || *reward > best->reward)) {
                best = BruteForceResult{x, *reward};
            }
        }
        // Odometer increment with the last dimension fastest, so the
        // enumeration order is lexicographic.
        std::size_t i = cards.size();
        while (i > 0) {
            --i;
            if (++x.indices[i] < cards[i]) {
                break;
            }
            x.indices[i] = 0;
            if (i == 0) {
                i = cards.size() + 1;
                break;
            }
        }
        if (i == cards.size() + 1) {
            break;
        }
    }
    if (!best) {
        throw ConfigError("every design in the space is anomalous");
    }
    return *best;
}

}  // namespace theta
