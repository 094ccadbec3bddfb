#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "theta/design_space.hpp"

namespace theta {

using Objectives = std::map<std::string, double>;

struct Anomaly {
    std::string reason;
};

struct EvalResult {
    std::variant<Objectives, Anomaly> outcome;

    static EvalResult ok(Objectives o) { return {std::move(o)}; }
    static EvalResult anomaly(std::string reason) { return {Anomaly{std::move(reason)}}; }

    bool is_anomaly() const { return std::holds_alternative<Anomaly>(outcome); }
    const Objectives& objectives() const { return std::get<Objectives>(outcome); }
    const std::string& reason() const { return std::get<Anomaly>(outcome).reason; }
};

// Something that scores complete designs. Implementations must be
// deterministic for a given design.
class Environment {
public:
    virtual ~Environment() = default;

    virtual const DesignSpace& space() const = 0;
    virtual EvalResult evaluate(const DesignPoint& design) = 0;

    // Results come back in input order. The default is sequential;
    // implementations may fan out as long as the order is preserved.
    virtual std::vector<EvalResult> evaluate_batch(std::span<const DesignPoint> designs);

    // Scalar reward of the known optimum, when the environment has one.
    virtual std::optional<double> optimum_reward() const { return std::nullopt; }
};

enum class DistanceKind { l1_index, hamming };

DistanceKind parse_distance_kind(const std::string& text);
std::string distance_kind_name(DistanceKind kind);

struct SyntheticSpec {
    std::vector<std::size_t> cardinalities;
    DistanceKind distance = DistanceKind::l1_index;
    std::uint64_t seed = 0;

    static SyntheticSpec uniform(std::size_t dims, std::size_t choices, DistanceKind distance, std::uint64_t seed);
};

inline constexpr const char* kDistanceObjective = "distance_penalty";

// Hidden-optimum benchmark: the single objective `distance_penalty` is the
// negated distance from the design to a point drawn from the seed.
class SyntheticEnvironment final : public Environment {
public:
    explicit SyntheticEnvironment(SyntheticSpec spec);
    SyntheticEnvironment(DesignSpace space, DistanceKind distance, std::uint64_t seed);

    const DesignSpace& space() const override { return space_; }
    EvalResult evaluate(const DesignPoint& design) override;
    std::optional<double> optimum_reward() const override { return 0.0; }

    DistanceKind distance_kind() const { return distance_; }
    double distance(const DesignPoint& design) const;

    // Test and reporting hook; the search never reads this.
    const DesignPoint& hidden_optimum_for_testing() const { return optimum_; }

private:
    DesignSpace space_;
    DistanceKind distance_;
    DesignPoint optimum_;
};

// Wraps a plain function; used for bandits and constant-reward checks.
class FunctionEnvironment final : public Environment {
public:
    using Fn = std::function<EvalResult(const DesignPoint&)>;
    FunctionEnvironment(DesignSpace space, Fn fn, std::optional<double> optimum = std::nullopt);

    const DesignSpace& space() const override { return space_; }
    EvalResult evaluate(const DesignPoint& design) override { return fn_(design); }
    std::optional<double> optimum_reward() const override { return optimum_; }

private:
    DesignSpace space_;
    Fn fn_;
    std::optional<double> optimum_;
};

// Sum of w_j * O_j (maximization). nullopt when a weighted objective is
// missing or the total is non-finite; callers treat that as an anomaly.
std::optional<double> weighted_reward(const Objectives& objectives, const Objectives& weights);

struct BruteForceResult {
    DesignPoint design;
    double reward;
};

inline constexpr double kBruteForceLimit = 1e7;

// Exhaustive argmax of the weighted reward; ties go to the lexicographically
// smallest design. Anomalous designs are skipped. Refuses spaces larger than
// kBruteForceLimit with ConfigError.
BruteForceResult brute_force_optimum(Environment& env, const Objectives& weights);

}  // namespace theta
