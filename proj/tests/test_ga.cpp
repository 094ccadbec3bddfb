#include "doctest.h"
#include "theta/errors.hpp"
#include "theta/ga.hpp"

using namespace theta;

TEST_CASE("mutation operators stay in range and change what they should") {
    auto space = DesignSpace::from_cardinalities({5, 1, 9, 2});
    GaConfig cfg;
    Rng rng(3);
    const DesignPoint a{{2, 0, 4, 1}}, b{{4, 0, 8, 0}}, c{{0, 0, 1, 1}};
    const DesignPoint parents[] = {a, b, c};
    for (int t = 0; t < 500; ++t) {
        for (auto op : {GaOperator::uniform_greedy, GaOperator::normal_greedy, GaOperator::diff_evolution}) {
            auto child = mutate(space, op, parents, rng, cfg);
            CHECK(space.contains(child));
            CHECK(child.indices[1] == 0);
            if (op != GaOperator::diff_evolution) {
                std::size_t changed = 0;
                for (std::size_t i = 0; i < 4; ++i) changed += child.indices[i] != a.indices[i];
                CHECK(changed <= 1);
            }
            if (op == GaOperator::normal_greedy) CHECK(child != a);
        }
    }
    const DesignPoint lone[] = {a};
    CHECK_THROWS_AS(mutate(space, GaOperator::diff_evolution, lone, rng, cfg), UsageError);
}

TEST_CASE("differential evolution formula") {
    auto space = DesignSpace::uniform(3, 20);
    GaConfig cfg;
    cfg.de_crossover = 1.0;
    cfg.de_weight = 0.5;
    Rng rng(1);
    const DesignPoint parents[] = {DesignPoint{{10, 0, 19}}, DesignPoint{{14, 19, 19}}, DesignPoint{{6, 0, 0}}};
    auto child = mutate(space, GaOperator::diff_evolution, parents, rng, cfg);
    // 10 + 0.5*8 = 14; 0 + 0.5*19 = 9.5 -> 10; 19 + 0.5*19 clamps to 19
    CHECK(child == DesignPoint{{14, 10, 19}});
}

TEST_CASE("config parsing") {
    auto cfg = ga_config_from_json({{"population_size", 8}, {"operators", {"normal_greedy"}}, {"bandit_epsilon", 0.3}});
    CHECK(cfg.population_size == 8);
    CHECK(cfg.operators == std::vector<GaOperator>{GaOperator::normal_greedy});
    CHECK(cfg.bandit_epsilon == 0.3);
    CHECK_THROWS_AS(ga_config_from_json({{"operators", {"crossover"}}}), ConfigError);
    CHECK_THROWS_AS(ga_config_from_json({{"pop", 3}}), ConfigError);
    GaConfig bad;
    bad.operators.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = GaConfig{};
    bad.bandit_epsilon = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("run_ga invariants") {
    SyntheticEnvironment env(SyntheticSpec::uniform(4, 10, DistanceKind::l1_index, 2));
    GaConfig cfg;
    cfg.seed = 4;
    cfg.max_evaluations = 3000;
    auto res = run_ga(env.space(), env, cfg);
    CHECK(res.evaluations == 3000);
    REQUIRE(res.trace.rows.size() == 3000);
    for (std::size_t i = 0; i < res.trace.rows.size(); ++i) {
        CHECK(res.trace.rows[i].evaluations == i + 1);
        if (i) CHECK(res.trace.rows[i].best_reward >= res.trace.rows[i - 1].best_reward);
    }
    CHECK(res.best_reward == res.trace.rows.back().best_reward);
    CHECK(env.evaluate(res.best_design).objectives().at(kDistanceObjective) == res.best_reward);
    // A 10^4-point space is easy for a greedy search.
    CHECK(res.best_reward == 0.0);

    auto again = run_ga(env.space(), env, cfg);
    CHECK(again.trace.rows == res.trace.rows);
    cfg.seed = 5;
    CHECK(run_ga(env.space(), env, cfg).trace.rows != res.trace.rows);
}

TEST_CASE("run_ga handles anomalies and tiny budgets") {
    auto space = DesignSpace::uniform(2, 6);
    FunctionEnvironment env(space, [](const DesignPoint& x) {
        if (x.indices[0] == 0) return EvalResult::anomaly("rejected");
        return EvalResult::ok({{kDistanceObjective, -static_cast<double>(x.indices[0] + x.indices[1])}});
    });
    GaConfig cfg;
    cfg.seed = 1;
    cfg.max_evaluations = 10;  // smaller than the population
    auto small = run_ga(space, env, cfg);
    CHECK(small.evaluations == 10);

    cfg.max_evaluations = 600;
    auto res = run_ga(space, env, cfg);
    CHECK(res.best_design == DesignPoint{{1, 0}});
    CHECK(res.best_reward == -1.0);
    for (const auto& row : res.trace.rows) {
        if (row.anomaly_count) CHECK(row.batch_mean_reward <= row.best_reward);
    }
}

TEST_CASE("normal_greedy reflects at the lower edge") {
    auto space = DesignSpace::uniform(1, 5);
    GaConfig cfg;
    cfg.normal_sigma_fraction = 1e-3;  // every step rounds to +-1
    Rng rng(7);
    const DesignPoint parents[] = {DesignPoint{{0}}};
    for (int t = 0; t < 200; ++t) {
        CHECK(mutate(space, GaOperator::normal_greedy, parents, rng, cfg) == DesignPoint{{1}});
    }
}

TEST_CASE("differential evolution with b == c copies a") {
    auto space = DesignSpace::uniform(4, 9);
    GaConfig cfg;
    Rng rng(2);
    const DesignPoint a{{1, 8, 3, 0}}, b{{5, 5, 5, 5}};
    const DesignPoint parents[] = {a, b, b};
    for (int t = 0; t < 100; ++t) CHECK(mutate(space, GaOperator::diff_evolution, parents, rng, cfg) == a);
}

TEST_CASE("single-member population on a two-point space") {
    auto space = DesignSpace::uniform(1, 2);
    FunctionEnvironment env(space, [](const DesignPoint& x) {
        return EvalResult::ok({{kDistanceObjective, x.indices[0] == 1 ? 0.0 : -1.0}});
    });
    GaConfig cfg;
    cfg.population_size = 1;
    cfg.operators = {GaOperator::uniform_greedy};
    cfg.max_evaluations = 20;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        cfg.seed = seed;
        auto res = run_ga(space, env, cfg);
        CHECK(res.best_design == DesignPoint{{1}});
        CHECK(res.best_reward == 0.0);
    }
}

TEST_CASE("best-so-far on 5x8 never decreases") {
    SyntheticEnvironment env(SyntheticSpec::uniform(5, 8, DistanceKind::l1_index, 3));
    GaConfig cfg;
    cfg.seed = 3;
    cfg.max_evaluations = 2000;
    auto res = run_ga(env.space(), env, cfg);
    const auto& rows = res.trace.rows;
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].best_reward >= rows[i - 1].best_reward);
    CHECK(rows.back().best_reward >= rows.front().best_reward);
}

TEST_CASE("ga stream is independent of the benchmark seed") {
    // Same seed for benchmark and search must not hand the search the optimum.
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        SyntheticEnvironment env(SyntheticSpec::uniform(20, 64, DistanceKind::l1_index, seed));
        GaConfig cfg;
        cfg.seed = seed;
        cfg.max_evaluations = 1;
        CHECK(run_ga(env.space(), env, cfg).best_reward < 0.0);
    }
}
