#include "theta/ga.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "theta/errors.hpp"

namespace theta {

using nlohmann::json;

GaOperator parse_ga_operator(const std::string& name) {
    if (name == "uniform_greedy") return GaOperator::uniform_greedy;
    if (name == "normal_greedy") return GaOperator::normal_greedy;
    if (name == "diff_evolution") return GaOperator::diff_evolution;
    throw ConfigError("unknown GA operator '" + name + "'");
}

std::string ga_operator_name(GaOperator op) {
    switch (op) {
        case GaOperator::uniform_greedy:
            return "uniform_greedy";
        case GaOperator::normal_greedy:
            return "normal_greedy";
        case GaOperator::diff_evolution:
            return "diff_evolution";
    }
    return "?";
}

void GaConfig::validate() const {
    if (population_size == 0) throw ConfigError("GA population_size must be positive");
    if (operators.empty()) throw ConfigError("GA needs at least one operator");
    if (!(bandit_epsilon >= 0.0 && bandit_epsilon <= 1.0)) throw ConfigError("GA bandit_epsilon must lie in [0,1]");
    if (max_evaluations == 0) throw ConfigError("GA max_evaluations must be positive");
    if (objective_weights.empty()) throw ConfigError("GA objective_weights must name at least one objective");
    if (!(normal_sigma_fraction > 0.0)) throw ConfigError("GA normal_sigma_fraction must be positive");
    if (!(de_crossover >= 0.0 && de_crossover <= 1.0)) throw ConfigError("GA de_crossover must lie in [0,1]");
}

json to_json(const GaConfig& cfg) {
    json ops = json::array();
    for (auto op : cfg.operators) {
        ops.push_back(ga_operator_name(op));
    }
    return {{"population_size", cfg.population_size},
            {"operators", ops},
            {"bandit_epsilon", cfg.bandit_epsilon},
            {"max_evaluations", cfg.max_evaluations},
            {"objective_weights", cfg.objective_weights},
            {"normal_sigma_fraction", cfg.normal_sigma_fraction},
            {"de_weight", cfg.de_weight},
            {"de_crossover", cfg.de_crossover}};
}

GaConfig ga_config_from_json(const json& j, GaConfig cfg) {
    if (!j.is_object()) {
        throw ConfigError("GA config must be a JSON object");
    }
    static const std::set<std::string> known{"population_size",       "operators",  "bandit_epsilon",
                                             "max_evaluations",       "seed",       "objective_weights",
                                             "normal_sigma_fraction", "de_weight",  "de_crossover"};
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown GA setting '" + key + "'");
        }
    }
    try {
        cfg.population_size = j.value("population_size", cfg.population_size);
        cfg.bandit_epsilon = j.value("bandit_epsilon", cfg.bandit_epsilon);
        cfg.max_evaluations = j.value("max_evaluations", cfg.max_evaluations);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.normal_sigma_fraction = j.value("normal_sigma_fraction", cfg.normal_sigma_fraction);
        cfg.de_weight = j.value("de_weight", cfg.de_weight);
        cfg.de_crossover = j.value("de_crossover", cfg.de_crossover);
        if (j.contains("objective_weights")) cfg.objective_weights = j["objective_weights"].get<Objectives>();
        if (j.contains("operators")) {
            cfg.operators.clear();
            for (const auto& name : j["operators"]) {
                cfg.operators.push_back(parse_ga_operator(name.get<std::string>()));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("GA config: ") + e.what());
    }
    return cfg;
}

namespace {

std::size_t pick_mutable_dim(const std::vector<std::size_t>& cards, Rng& rng) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < cards.size(); ++i) {
        if (cards[i] > 1) {
            open.push_back(i);
        }
    }
    return open.empty() ? rng.index(cards.size()) : open[rng.index(open.size())];
}

long long reflect(long long idx, long long card) {
    if (card <= 1) {
        return 0;
    }
    const long long hi = card - 1;
    while (idx < 0 || idx > hi) {
        idx = idx < 0 ? -idx : 2 * hi - idx;
    }
    return idx;
}

}  // namespace

DesignPoint mutate(const DesignSpace& space, GaOperator op, std::span<const DesignPoint> parents, Rng& rng,
                   const GaConfig& cfg) {
    const auto cards = space.cardinalities();
    const std::size_t needed = op == GaOperator::diff_evolution ? 3 : 1;
    if (parents.size() < needed) {
        throw UsageError(ga_operator_name(op) + " needs " + std::to_string(needed) + " parents");
    }
    for (std::size_t k = 0; k < needed; ++k) {
        space.validate(parents[k]);
    }
    DesignPoint child = parents[0];
    switch (op) {
        case GaOperator::uniform_greedy: {
            const std::size_t i = pick_mutable_dim(cards, rng);
            child.indices[i] = rng.index(cards[i]);
            break;
        }
        case GaOperator::normal_greedy: {
            const std::size_t i = pick_mutable_dim(cards, rng);
            const double sigma = static_cast<double>(cards[i]) * cfg.normal_sigma_fraction;
            const double z = rng.normal();
            auto step = static_cast<long long>(std::llround(z * sigma));
            if (step == 0 && cards[i] > 1) {
                step = z < 0.0 ? -1 : 1;
            }
            child.indices[i] = static_cast<std::size_t>(
                reflect(static_cast<long long>(child.indices[i]) + step, static_cast<long long>(cards[i])));
            break;
        }
        case GaOperator::diff_evolution: {
            const auto& a = parents[0];
            const auto& b = parents[1];
            const auto& c = parents[2];
            const std::size_t forced = rng.index(cards.size());
            for (std::size_t i = 0; i < cards.size(); ++i) {
                const bool cross = rng.bernoulli(cfg.de_crossover) || i == forced;
                if (!cross) {
                    continue;
                }
                const double diff = static_cast<double>(b.indices[i]) - static_cast<double>(c.indices[i]);
                const long long v = static_cast<long long>(a.indices[i]) + std::llround(cfg.de_weight * diff);
                child.indices[i] = static_cast<std::size_t>(std::clamp<long long>(v, 0, static_cast<long long>(cards[i]) - 1));
            }
            break;
        }
    }
    return child;
}

namespace {

struct Member {
    DesignPoint design;
    double reward;
};

struct OperatorStats {
    std::uint64_t uses = 0;
    double credit = 0.0;
};

class GaRun {
public:
    GaRun(const DesignSpace& space, Environment& env, const GaConfig& cfg)
        : space_(space), env_(env), cfg_(cfg), rng_(Rng(cfg.seed).split(3)), stats_(cfg.operators.size()) {}

    RunResult run() {
        while (result_.evaluations < cfg_.max_evaluations && population_.size() < cfg_.population_size) {
            DesignPoint x;
            for (std::size_t d : space_.cardinalities()) {
                x.indices.push_back(rng_.index(d));
            }
            population_.push_back({x, evaluate(x)});
        }
        while (result_.evaluations < cfg_.max_evaluations) {
            step();
        }
        return std::move(result_);
    }

private:
    double evaluate(const DesignPoint& x) {
        EvalResult r;
        try {
            r = env_.evaluate(x);
        } catch (const EnvironmentFailure& e) {
            throw RunAborted(std::string("environment failure: ") + e.what(), std::move(result_));
        }
        ++result_.evaluations;
        std::optional<double> reward;
        if (!r.is_anomaly()) {
            reward = weighted_reward(r.objectives(), cfg_.objective_weights);
        }
        double score;
        if (reward) {
            score = *reward;
            worst_seen_ = std::min(worst_seen_, score);
            if (!have_best_ || score > result_.best_reward) {
                result_.best_reward = score;
                result_.best_design = x;
                have_best_ = true;
            }
        } else {
            score = (std::isfinite(worst_seen_) ? worst_seen_ : 0.0) - 1.0;
        }
        TraceRow row;
        row.cycle = result_.evaluations - 1;
        row.evaluations = result_.evaluations;
        row.batch_mean_reward = score;
        double total = score;
        for (const auto& m : population_) {
            total += m.reward;
        }
        row.running_reward = total / static_cast<double>(population_.size() + 1);
        row.best_reward = have_best_ ? result_.best_reward : score;
        row.anomaly_count = reward ? 0 : 1;
        result_.trace.rows.push_back(row);
        return score;
    }

    std::size_t choose_operator() {
        if (cfg_.operators.size() == 1) {
            return 0;
        }
        if (rng_.bernoulli(cfg_.bandit_epsilon)) {
            return rng_.index(cfg_.operators.size());
        }
        std::size_t best = 0;
        double best_value = -1.0;
        for (std::size_t k = 0; k < stats_.size(); ++k) {
            const double value = stats_[k].uses == 0 ? std::numeric_limits<double>::infinity()
                                                     : stats_[k].credit / static_cast<double>(stats_[k].uses);
            if (value > best_value) {
                best_value = value;
                best = k;
            }
        }
        return best;
    }

    std::size_t best_index() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < population_.size(); ++i) {
            if (population_[i].reward > population_[best].reward) best = i;
        }
        return best;
    }

    std::size_t worst_index() const {
        std::size_t worst = 0;
        for (std::size_t i = 1; i < population_.size(); ++i) {
            if (population_[i].reward < population_[worst].reward) worst = i;
        }
        return worst;
    }

    void step() {
        const std::size_t k = choose_operator();
        const GaOperator op = cfg_.operators[k];
        std::vector<DesignPoint> parents;
        double parent_reward;
        if (op == GaOperator::diff_evolution) {
            const std::size_t a = rng_.index(population_.size());
            parents = {population_[a].design, population_[rng_.index(population_.size())].design,
                       population_[rng_.index(population_.size())].design};
            parent_reward = population_[a].reward;
        } else {
            const std::size_t b = best_index();
            parents = {population_[b].design};
            parent_reward = population_[b].reward;
        }
        DesignPoint child = mutate(space_, op, parents, rng_, cfg_);
        const double score = evaluate(child);
        stats_[k].uses += 1;
        stats_[k].credit += std::max(0.0, score - parent_reward);
        const std::size_t w = worst_index();
        if (score > population_[w].reward) {
            population_[w] = {std::move(child), score};
        }
    }

    const DesignSpace& space_;
    Environment& env_;
    const GaConfig& cfg_;
    Rng rng_;
    std::vector<OperatorStats> stats_;
    std::vector<Member> population_;
    RunResult result_;
    bool have_best_ = false;
    double worst_seen_ = std::numeric_limits<double>::infinity();
};

}  // namespace

RunResult run_ga(const DesignSpace& space, Environment& env, const GaConfig& cfg) {
    cfg.validate();
    if (env.space().cardinalities() != space.cardinalities()) {
        throw ConfigError("environment space does not match the GA space");
    }
    return GaRun(space, env, cfg).run();
}

}  // namespace theta
