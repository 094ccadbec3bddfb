#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "theta/errors.hpp"
#include "theta/experiment.hpp"

using namespace theta;

namespace {

struct Overrides {
    std::string seeds;
    std::uint64_t max_evals = 0;
    std::string arch;
    std::size_t eval_workers = 0;
    std::string out;
    std::string label;
    std::string method;
    std::size_t jobs = 1;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seeds", o.seeds, "seed list, e.g. 1-8 or 3,5,9");
    cmd->add_option("--max-evals", o.max_evals, "evaluation budget per seed");
    cmd->add_option("--arch", o.arch, "policy network, e.g. mlp or transformer:2-64-4-256");
    cmd->add_option("--eval-workers", o.eval_workers, "evaluator processes for external envs");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--label", o.label, "name used by compare");
    cmd->add_option("--jobs", o.jobs, "seeds run concurrently")->check(CLI::PositiveNumber);
}

void apply(ExperimentConfig& cfg, const Overrides& o) {
    if (!o.method.empty()) {
        if (o.method == "resonance") {
            cfg.method = MethodKind::resonance;
        } else if (o.method == "ga") {
            cfg.method = MethodKind::ga;
            cfg.ga.objective_weights = cfg.hyper.objective_weights;
        } else {
            throw ConfigError("unknown method '" + o.method + "'");
        }
        cfg.label = o.method;
    }
    if (!o.seeds.empty()) cfg.seeds = parse_seed_list(o.seeds);
    if (o.max_evals) cfg.set_max_evaluations(o.max_evals);
    if (!o.arch.empty()) cfg.arch = parse_architecture(o.arch);
    if (o.eval_workers) cfg.env.workers = o.eval_workers;
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (!o.label.empty()) cfg.label = o.label;
    cfg.validate();
}

DesignSpace resolve_space(const std::string& what) {
    if (what == "soc") return soc_space();
    if (!std::filesystem::exists(what)) {
        for (const auto& name : bench_preset_names()) {
            if (name == what) return bench_preset(name).space;
        }
    }
    return load_space(what);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"theta-dse: single-step policy-gradient design space exploration"};
    app.require_subcommand(1);

    Overrides run_o;
    std::string config_path;
    auto* run = app.add_subcommand("run", "run an experiment config once per seed");
    run->add_option("config", config_path, "experiment JSON")->required();
    add_overrides(run, run_o);

    Overrides bench_o;
    std::string preset;
    auto* bench = app.add_subcommand("bench", "run a built-in synthetic benchmark");
    bench->add_option("preset", preset, "tiny-5x8 | paper-20x64 | soc-shape")->required();
    bench->add_option("--method", bench_o.method, "resonance or ga");
    add_overrides(bench, bench_o);

    CompareOptions cmp;
    double threshold = 0.0;
    auto* compare = app.add_subcommand("compare", "merge aggregates from several run directories");
    compare->add_option("dirs", cmp.dirs, "run output directories")->required();
    compare->add_option("--out", cmp.merged_csv, "merged CSV path");
    auto* threshold_opt = compare->add_option("--threshold", threshold, "reward for samples-to-threshold");

    std::string space_arg;
    auto* info = app.add_subcommand("space-info", "describe a design space");
    info->add_option("space", space_arg, "space JSON, 'soc', or a bench preset name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            ExperimentConfig cfg = load_experiment(config_path);
            apply(cfg, run_o);
            return run_experiment(cfg, std::cout, run_o.jobs);
        }
        if (*bench) {
            ExperimentConfig cfg = bench_preset(preset);
            apply(cfg, bench_o);
            return run_experiment(cfg, std::cout, bench_o.jobs);
        }
        if (*compare) {
            if (*threshold_opt) cmp.threshold = threshold;
            return compare_experiments(cmp, std::cout, std::cerr);
        }
        if (*info) {
            const DesignSpace space = resolve_space(space_arg);
            std::cout << space_header(space) << '\n';
            std::cout << "cardinalities:";
            for (auto c : space.cardinalities()) std::cout << ' ' << c;
            std::cout << "\nhash: " << space.hash() << '\n';
            for (const auto& d : space.dimensions()) {
                std::cout << "  " << d.name << " (" << d.cardinality() << ")\n";
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
