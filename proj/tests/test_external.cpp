#include <chrono>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "theta/errors.hpp"
#include "theta/external_evaluator.hpp"
#include "theta/resonance.hpp"

using namespace theta;
using namespace std::chrono_literals;

namespace {

DesignSpace demo_space() {
    return DesignSpace("demo", {{"cpu", {"cpu_a", "cpu_b", "cpu_c"}}, {"cache", {"c1", "c2", "c4", "c8"}}});
}

std::string space_file() {
    static const std::string path = [] {
        auto p = std::filesystem::temp_directory_path() / "theta_external_test_space.json";
        std::ofstream(p) << serialize_space(demo_space()).dump();
        return p.string();
    }();
    return path;
}

EvaluatorOptions stub(std::vector<std::string> extra, std::chrono::milliseconds timeout = 10s) {
    EvaluatorOptions o;
    o.command = {STUB_EVALUATOR, "--space", space_file()};
    o.command.insert(o.command.end(), extra.begin(), extra.end());
    o.timeout = timeout;
    return o;
}

}  // namespace

TEST_CASE("echo") {
    EvaluatorProcess p(demo_space(), stub({"--objective", "score=1.0"}));
    auto r = evaluate_external(DesignPoint{{0, 0}}, p);
    REQUIRE_FALSE(r.is_anomaly());
    CHECK(r.objectives() == Objectives{{"score", 1.0}});
}

TEST_CASE("linear objectives and rejection") {
    EvaluatorProcess p(demo_space(),
                       stub({"--linear", "cost:cache=2.5", "--linear", "cost:cpu=-1", "--reject", "cpu=cpu_b"}));
    auto ok = p.evaluate(DesignPoint{{2, 3}});
    REQUIRE_FALSE(ok.is_anomaly());
    CHECK(ok.objectives().at("cost") == 2.5 * 3 - 2);
    auto bad = p.evaluate(DesignPoint{{1, 0}});
    REQUIRE(bad.is_anomaly());
    CHECK(bad.reason() == "rejected");
}

TEST_CASE("protocol faults become anomalies and the channel survives") {
    EvaluatorProcess p(demo_space(),
                       stub({"--objective", "score=3", "--wrong-id-on", "cpu=cpu_b", "--malformed-on", "cpu=cpu_c"}));
    auto wrong = p.evaluate(DesignPoint{{1, 0}});
    REQUIRE(wrong.is_anomaly());
    CHECK(wrong.reason() == "protocol");
    auto garbage = p.evaluate(DesignPoint{{2, 0}});
    REQUIRE(garbage.is_anomaly());
    CHECK(garbage.reason() == "protocol");
    auto fine = p.evaluate(DesignPoint{{0, 1}});
    REQUIRE_FALSE(fine.is_anomaly());
    CHECK(fine.objectives().at("score") == 3.0);
}

TEST_CASE("timeout becomes an anomaly and the worker is replaced") {
    EvaluatorProcess p(demo_space(), stub({"--objective", "score=1", "--hang-on", "cache=c8"}, 300ms));
    const int first_pid = p.pid();
    const auto t0 = std::chrono::steady_clock::now();
    auto hung = p.evaluate(DesignPoint{{0, 3}});
    CHECK(std::chrono::steady_clock::now() - t0 < 5s);
    REQUIRE(hung.is_anomaly());
    CHECK(hung.reason() == "timeout");
    CHECK(p.pid() != first_pid);
    CHECK_FALSE(p.evaluate(DesignPoint{{0, 0}}).is_anomaly());
}

TEST_CASE("process death is a run-level failure") {
    EvaluatorProcess p(demo_space(), stub({"--objective", "score=1", "--crash-after", "2"}));
    CHECK_FALSE(p.evaluate(DesignPoint{{0, 0}}).is_anomaly());
    CHECK_FALSE(p.evaluate(DesignPoint{{0, 1}}).is_anomaly());
    CHECK_THROWS_AS(p.evaluate(DesignPoint{{0, 2}}), EnvironmentFailure);
}

TEST_CASE("handshake failures") {
    CHECK_THROWS_AS(EvaluatorProcess(demo_space(), stub({"--refuse-handshake"})), EnvironmentFailure);
    // The stub checks the space hash it is given against its own file.
    CHECK_THROWS_AS(EvaluatorProcess(DesignSpace::uniform(2, 3), stub({})), EnvironmentFailure);
    EvaluatorOptions missing;
    missing.command = {"/nonexistent/evaluator"};
    CHECK_THROWS_AS(EvaluatorProcess(demo_space(), missing), EnvironmentFailure);
}

TEST_CASE("worker pool keeps batch order") {
    ExternalEnvironment env(demo_space(), stub({"--linear", "v:cpu=10", "--linear", "v:cache=1"}), 3);
    CHECK(env.workers() == 3);
    std::vector<DesignPoint> xs;
    for (std::size_t i = 0; i < 12; ++i) xs.push_back(DesignPoint{{i % 3, i % 4}});
    auto results = env.evaluate_batch(xs);
    REQUIRE(results.size() == xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(results[i].objectives().at("v") == 10.0 * static_cast<double>(i % 3) + static_cast<double>(i % 4));
    }
}

TEST_CASE("training through the stub") {
    auto space = demo_space();
    HyperParams hp;
    hp.objective_weights = {{"cost", -1.0}};
    hp.max_evaluations = 64;

    SUBCASE("rejections receive the anomaly reward") {
        ExternalEnvironment env(space, stub({"--linear", "cost:cache=1", "--reject", "cpu=cpu_b"}), 2);
        auto net = PolicyNet::build(space, parse_architecture("mlp:8"), 1);
        auto res = train(space, net, env, hp, 1);
        std::uint64_t anomalies = 0;
        for (const auto& r : res.trace.rows) anomalies += r.anomaly_count;
        CHECK(anomalies > 0);
        CHECK(res.evaluations == 64);
        CHECK(res.best_reward == 0.0);
        CHECK(res.best_design.indices[0] != 1);
    }
    SUBCASE("a crash aborts with the trace so far") {
        ExternalEnvironment env(space, stub({"--linear", "cost:cache=1", "--crash-after", "20"}), 1);
        auto net = PolicyNet::build(space, parse_architecture("mlp:8"), 1);
        try {
            train(space, net, env, hp, 1);
            FAIL("expected RunAborted");
        } catch (const RunAborted& e) {
            CHECK(e.partial().trace.rows.size() == 2);
            CHECK(e.partial().evaluations == 16);
        }
    }
}
