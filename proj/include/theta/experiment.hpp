#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "theta/design_space.hpp"
#include "theta/envs.hpp"
#include "theta/external_evaluator.hpp"
#include "theta/ga.hpp"
#include "theta/policy.hpp"
#include "theta/resonance.hpp"
#include "theta/trace.hpp"

namespace theta {

enum class EnvKind { synthetic, external };
enum class MethodKind { resonance, ga };

std::string method_name(MethodKind m);

struct EnvConfig {
    EnvKind kind = EnvKind::synthetic;
    // synthetic
    DistanceKind distance = DistanceKind::l1_index;
    std::uint64_t env_seed = 1;
    // external
    std::vector<std::string> command;
    double timeout_seconds = 300.0;
    std::size_t workers = 1;
};

struct ExperimentConfig {
    std::string label;  // defaults to the method name
    DesignSpace space = DesignSpace::uniform(1, 2);
    EnvConfig env;
    MethodKind method = MethodKind::resonance;
    Architecture arch = MlpArch{};
    HyperParams hyper;
    GaConfig ga;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "theta-out";
    bool save_checkpoints = true;

    std::uint64_t max_evaluations() const;
    void set_max_evaluations(std::uint64_t n);
    void validate() const;
};

// Seeds used when a config names none: THETA_DSE_SEED (default 1) and the
// seven integers after it.
std::vector<std::uint64_t> default_seeds();

// `base_dir` resolves a relative space path.
ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::string& base_dir = ".");
ExperimentConfig load_experiment(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

// "1,2,5" or "1-8" or a mix.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg);

ExperimentConfig bench_preset(const std::string& name);
std::vector<std::string> bench_preset_names();

// Compact scientific form used in headers: 1.329228e36.
std::string format_space_size(double size);
std::string space_header(const DesignSpace& space);

// 1, 2, 5, 10, 20, 50, ... up to and including max_evaluations.
std::vector<std::uint64_t> aggregate_budgets(std::uint64_t max_evaluations);

struct SeedOutcome {
    std::uint64_t seed = 0;
    RunResult result;
    bool aborted = false;
    std::string error;
};

nlohmann::json seed_summary(const ExperimentConfig& cfg, const Environment* env, const SeedOutcome& s);
nlohmann::json aggregate(const ExperimentConfig& cfg, std::optional<double> optimum,
                         const std::vector<SeedOutcome>& seeds);

// Runs every seed and writes trace_seed<N>.csv, summary_seed<N>.json and
// aggregate.json into cfg.output_dir. Returns the process exit code.
int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::size_t jobs = 1);

struct CompareOptions {
    std::vector<std::string> dirs;
    std::string merged_csv = "compare.csv";
    std::optional<double> threshold;
};

int compare_experiments(const CompareOptions& opts, std::ostream& out, std::ostream& err);

inline constexpr const char* kAggregateSchema = "theta-dse-aggregate";

}  // namespace theta
