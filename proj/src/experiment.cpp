#include "theta/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "theta/errors.hpp"

namespace theta {

using nlohmann::json;
namespace fs = std::filesystem;

std::string method_name(MethodKind m) { return m == MethodKind::resonance ? "resonance" : "ga"; }

std::uint64_t ExperimentConfig::max_evaluations() const {
    return method == MethodKind::resonance ? hyper.max_evaluations : ga.max_evaluations;
}

void ExperimentConfig::set_max_evaluations(std::uint64_t n) {
    hyper.max_evaluations = n;
    ga.max_evaluations = n;
}

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("seeds must be distinct");
    }
    if (output_dir.empty()) throw ConfigError("output_dir is empty");
    if (env.kind == EnvKind::external) {
        if (env.command.empty()) throw ConfigError("external env needs a command");
        if (!(env.timeout_seconds > 0.0)) throw ConfigError("external env timeout must be positive");
        if (env.workers == 0) throw ConfigError("eval workers must be positive");
    }
    if (method == MethodKind::resonance) {
        hyper.validate();
        validate_architecture(arch);
    } else {
        ga.validate();
    }
}

std::vector<std::uint64_t> default_seeds() {
    std::uint64_t base = 1;
    if (const char* env = std::getenv("THETA_DSE_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            base = std::stoull(env, &used);
            if (env[used] != '\0') throw std::invalid_argument(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("THETA_DSE_SEED is not an integer: ") + env);
        }
    }
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 8; ++i) seeds.push_back(base + i);
    return seeds;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    auto num = [&](const std::string& s) {
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (s.empty() || used != s.size() || s[0] == '-') throw ConfigError("bad seed '" + s + "' in '" + text + "'");
        return v;
    };
    while (std::getline(ss, item, ',')) {
        const auto dash = item.find('-', 1);
        if (dash == std::string::npos) {
            out.push_back(num(item));
        } else {
            const auto lo = num(item.substr(0, dash));
            const auto hi = num(item.substr(dash + 1));
            if (hi < lo || hi - lo > 100000) throw ConfigError("bad seed range '" + item + "'");
            for (auto s = lo; s <= hi; ++s) out.push_back(s);
        }
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

const json& single_entry(const json& j, const std::string& where, std::string& key) {
    if (!j.is_object() || j.size() != 1) {
        throw ConfigError(where + " must be an object with exactly one entry");
    }
    key = j.begin().key();
    return j.begin().value();
}

DesignSpace parse_space_field(const json& j, const std::string& base_dir) {
    if (j.is_string()) {
        const std::string text = j.get<std::string>();
        if (text == "soc") return soc_space();
        fs::path p(text);
        if (p.is_relative()) p = fs::path(base_dir) / p;
        return load_space(p.string());
    }
    if (j.is_object() && j.contains("uniform")) {
        const auto& u = j["uniform"];
        return DesignSpace::uniform(u.at("dims").get<std::size_t>(), u.at("choices").get<std::size_t>(),
                                    j.value("name", "synthetic"));
    }
    if (j.is_object() && j.contains("cardinalities")) {
        return DesignSpace::from_cardinalities(j["cardinalities"].get<std::vector<std::size_t>>(),
                                               j.value("name", "synthetic"));
    }
    return parse_space(j);
}

}  // namespace

ExperimentConfig parse_experiment(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) throw ConfigError("experiment config must be a JSON object");
    reject_unknown(doc,
                   {"label", "space", "env", "method", "seeds", "output_dir", "max_evaluations", "save_checkpoints"},
                   "experiment config");
    ExperimentConfig cfg;
    try {
        if (!doc.contains("space")) throw ConfigError("experiment config needs 'space'");
        cfg.space = parse_space_field(doc["space"], base_dir);

        // A missing env or method means the synthetic L1 benchmark and resonance.
        const json env_doc = doc.contains("env") ? doc["env"] : json{{"synthetic", json::object()}};
        std::string env_kind;
        const json& env = single_entry(env_doc, "'env'", env_kind);
        if (env_kind == "synthetic") {
            reject_unknown(env, {"distance", "seed"}, "synthetic env");
            cfg.env.kind = EnvKind::synthetic;
            cfg.env.distance = parse_distance_kind(env.value("distance", std::string("l1")));
            cfg.env.env_seed = env.value("seed", cfg.env.env_seed);
        } else if (env_kind == "external") {
            reject_unknown(env, {"command", "timeout_seconds", "workers"}, "external env");
            cfg.env.kind = EnvKind::external;
            cfg.env.command = env.at("command").get<std::vector<std::string>>();
            cfg.env.timeout_seconds = env.value("timeout_seconds", cfg.env.timeout_seconds);
            cfg.env.workers = env.value("workers", cfg.env.workers);
        } else {
            throw ConfigError("unknown env type '" + env_kind + "'");
        }

        const json method_doc = doc.contains("method") ? doc["method"] : json{{"resonance", json::object()}};
        std::string method_kind;
        const json& method = single_entry(method_doc, "'method'", method_kind);
        if (!method.is_object()) throw ConfigError("method settings must be an object");
        if (method_kind == "resonance") {
            reject_unknown(method, {"arch", "hyper"}, "resonance method");
            cfg.method = MethodKind::resonance;
            if (method.contains("arch")) cfg.arch = parse_architecture(method["arch"].get<std::string>());
            if (method.contains("hyper")) cfg.hyper = hyper_params_from_json(method["hyper"]);
        } else if (method_kind == "ga") {
            cfg.method = MethodKind::ga;
            cfg.ga = ga_config_from_json(method);
        } else {
            throw ConfigError("unknown method '" + method_kind + "'");
        }

        if (doc.contains("max_evaluations")) cfg.set_max_evaluations(doc["max_evaluations"].get<std::uint64_t>());
        cfg.seeds = doc.contains("seeds") ? doc["seeds"].get<std::vector<std::uint64_t>>() : default_seeds();
        cfg.output_dir = doc.value("output_dir", cfg.output_dir);
        cfg.label = doc.value("label", method_name(cfg.method));
        cfg.save_checkpoints = doc.value("save_checkpoints", cfg.save_checkpoints);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    const json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
    return parse_experiment(doc, fs::path(path).parent_path().string().empty()
                                     ? std::string(".")
                                     : fs::path(path).parent_path().string());
}

json to_json(const ExperimentConfig& cfg) {
    json env;
    if (cfg.env.kind == EnvKind::synthetic) {
        env = {{"synthetic", {{"distance", distance_kind_name(cfg.env.distance)}, {"seed", cfg.env.env_seed}}}};
    } else {
        env = {{"external",
                {{"command", cfg.env.command},
                 {"timeout_seconds", cfg.env.timeout_seconds},
                 {"workers", cfg.env.workers}}}};
    }
    json method;
    if (cfg.method == MethodKind::resonance) {
        method = {{"resonance", {{"arch", architecture_string(cfg.arch)}, {"hyper", to_json(cfg.hyper)}}}};
    } else {
        method = {{"ga", to_json(cfg.ga)}};
    }
    return {{"label", cfg.label},     {"space", serialize_space(cfg.space)}, {"env", env},
            {"method", method},       {"seeds", cfg.seeds},                  {"output_dir", cfg.output_dir},
            {"save_checkpoints", cfg.save_checkpoints}};
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
    if (cfg.env.kind == EnvKind::synthetic) {
        return std::make_unique<SyntheticEnvironment>(cfg.space, cfg.env.distance, cfg.env.env_seed);
    }
    EvaluatorOptions opts;
    opts.command = cfg.env.command;
    opts.timeout = std::chrono::milliseconds(static_cast<long long>(std::llround(cfg.env.timeout_seconds * 1000.0)));
    return std::make_unique<ExternalEnvironment>(cfg.space, opts, cfg.env.workers);
}

std::vector<std::string> bench_preset_names() { return {"tiny-5x8", "paper-20x64", "soc-shape"}; }

ExperimentConfig bench_preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.seeds = default_seeds();
    cfg.output_dir = "bench-" + name;
    cfg.label = "resonance";
    if (name == "tiny-5x8") {
        cfg.space = DesignSpace::uniform(5, 8, name);
        cfg.set_max_evaluations(5000);
        // Unscaled L1 rewards here spread over ~10 units; 0.05 lets the
        // policy lock onto a near miss before the optimum is sampled.
        cfg.hyper.beta_e0 = 0.5;
    } else if (name == "paper-20x64") {
        cfg.space = DesignSpace::uniform(20, 64, name);
        cfg.set_max_evaluations(200000);
        // Distances reach ~600 here; unscaled advantages of that size drown
        // the KL and entropy terms and the policy locks in early.
        cfg.hyper.objective_weights = {{kDistanceObjective, 0.02}};
        // A choice that drops out of the samples early keeps sinking and its
        // dimension sticks one step off the optimum. More entropy early and a
        // floor of 0.01 keep every choice in play; the narrower MLP moves its
        // logits less per Adam step.
        cfg.hyper.beta_e0 = 0.2;
        cfg.hyper.beta_min = 0.01;
        cfg.arch = MlpArch{{64, 64}, 16};
    } else if (name == "soc-shape") {
        cfg.space = soc_space();
        cfg.set_max_evaluations(20000);
    } else {
        throw ConfigError("unknown bench preset '" + name + "'");
    }
    return cfg;
}

std::string format_space_size(double size) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.7e", size);
    std::string s(buf);
    const auto e = s.find('e');
    std::string mant = s.substr(0, e);
    int exp = std::atoi(s.c_str() + e + 1);
    while (!mant.empty() && mant.back() == '0') mant.pop_back();
    if (!mant.empty() && mant.back() == '.') mant.pop_back();
    return mant + "e" + std::to_string(exp);
}

std::string space_header(const DesignSpace& space) {
    std::ostringstream out;
    out << "space " << space.name() << ": D=" << space.size() << " total_width=" << space.total_width()
        << " space_size=" << format_space_size(space.space_size());
    if (auto exact = space.space_size_exact()) out << " (exact " << *exact << ")";
    return out.str();
}

std::vector<std::uint64_t> aggregate_budgets(std::uint64_t max_evaluations) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t scale = 1; scale <= max_evaluations; scale *= 10) {
        for (std::uint64_t m : {1, 2, 5}) {
            if (m * scale <= max_evaluations) out.push_back(m * scale);
        }
        if (scale > max_evaluations / 10) break;
    }
    if (out.empty() || out.back() != max_evaluations) out.push_back(max_evaluations);
    return out;
}

namespace {

std::optional<double> optimum_for(const ExperimentConfig& cfg, const Environment* env) {
    if (!env) return std::nullopt;
    auto raw = env->optimum_reward();
    if (!raw) return std::nullopt;
    if (cfg.env.kind == EnvKind::synthetic) {
        const auto& w = cfg.method == MethodKind::resonance ? cfg.hyper.objective_weights : cfg.ga.objective_weights;
        return weighted_reward({{kDistanceObjective, *raw}}, w);
    }
    return raw;
}

bool reached(double best, double optimum) { return best >= optimum - 1e-9 * std::max(1.0, std::abs(optimum)); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json nullable(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

std::string seed_file(const std::string& dir, const char* stem, std::uint64_t seed, const char* ext) {
    return (fs::path(dir) / (std::string(stem) + "_seed" + std::to_string(seed) + ext)).string();
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace

json seed_summary(const ExperimentConfig& cfg, const Environment* env, const SeedOutcome& s) {
    const auto& r = s.result;
    const bool any = !r.best_design.indices.empty();
    json j{{"seed", s.seed},
           {"label", cfg.label},
           {"method", method_name(cfg.method)},
           {"evaluations", r.evaluations},
           {"best_reward", any ? json(r.best_reward) : json(nullptr)},
           {"best_penalty", any ? json(-r.best_reward) : json(nullptr)},
           {"best_design", any ? cfg.space.to_wire(r.best_design) : json(nullptr)},
           {"aborted", s.aborted},
           {"warnings", r.warnings}};
    if (s.aborted) j["error"] = s.error;
    if (auto opt = optimum_for(cfg, env)) {
        j["optimum_reward"] = *opt;
        j["reached_optimum"] = any && reached(r.best_reward, *opt);
    }
    return j;
}

json aggregate(const ExperimentConfig& cfg, std::optional<double> optimum, const std::vector<SeedOutcome>& seeds) {
    json per_seed = json::array();
    std::size_t hits = 0;
    for (const auto& s : seeds) {
        const bool any = !s.result.best_design.indices.empty();
        json e{{"seed", s.seed},
               {"best_reward", any ? json(s.result.best_reward) : json(nullptr)},
               {"evaluations", s.result.evaluations},
               {"aborted", s.aborted}};
        if (optimum) {
            const bool hit = any && reached(s.result.best_reward, *optimum);
            hits += hit;
            e["reached_optimum"] = hit;
        }
        per_seed.push_back(e);
    }
    json budgets = json::array();
    for (std::uint64_t b : aggregate_budgets(cfg.max_evaluations())) {
        json values = json::array();
        std::vector<double> present;
        for (const auto& s : seeds) {
            double best;
            if (s.result.trace.best_at(b, best)) {
                values.push_back(best);
                present.push_back(best);
            } else {
                values.push_back(nullptr);
            }
        }
        json row{{"evaluations", b}, {"per_seed", values}, {"count", present.size()}};
        if (present.empty()) {
            row["median"] = row["min"] = row["max"] = nullptr;
        } else {
            row["median"] = median(present);
            row["min"] = *std::min_element(present.begin(), present.end());
            row["max"] = *std::max_element(present.begin(), present.end());
        }
        budgets.push_back(row);
    }
    json j{{"schema", kAggregateSchema},
           {"version", 1},
           {"label", cfg.label},
           {"method", method_name(cfg.method)},
           {"space",
            {{"name", cfg.space.name()},
             {"hash", cfg.space.hash()},
             {"dims", cfg.space.size()},
             {"total_width", cfg.space.total_width()},
             {"space_size", cfg.space.space_size()}}},
           {"max_evaluations", cfg.max_evaluations()},
           {"optimum_reward", nullable(optimum)},
           {"seeds", per_seed},
           {"budgets", budgets}};
    if (optimum) j["seeds_reaching_optimum"] = hits;
    return j;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log, std::size_t jobs) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) {
        log << "error: cannot create output directory '" << cfg.output_dir << "': " << ec.message() << '\n';
        return 1;
    }
    log << "method " << cfg.label << " (" << method_name(cfg.method);
    if (cfg.method == MethodKind::resonance) log << ", arch " << architecture_string(cfg.arch);
    log << "), " << cfg.seeds.size() << " seed(s), budget " << cfg.max_evaluations() << '\n';
    log << space_header(cfg.space) << '\n';
    log << std::flush;
    write_json((fs::path(cfg.output_dir) / "config.json").string(), to_json(cfg));

    std::vector<SeedOutcome> outcomes(cfg.seeds.size());
    std::optional<double> optimum;
    bool optimum_known = false;
    std::mutex mu;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= cfg.seeds.size()) return;
            SeedOutcome& s = outcomes[k];
            s.seed = cfg.seeds[k];
            std::unique_ptr<Environment> env;
            std::optional<PolicyNet> net;
            try {
                env = make_environment(cfg);
                if (cfg.method == MethodKind::resonance) {
                    net = PolicyNet::build(cfg.space, cfg.arch, s.seed);
                    s.result = train(cfg.space, *net, *env, cfg.hyper, s.seed);
                } else {
                    GaConfig ga = cfg.ga;
                    ga.seed = s.seed;
                    s.result = run_ga(cfg.space, *env, ga);
                }
            } catch (const RunAborted& e) {
                s.aborted = true;
                s.error = e.what();
                s.result = e.partial();
            } catch (const ConfigError&) {
                throw;
            } catch (const Error& e) {
                s.aborted = true;
                s.error = e.what();
            }
            write_trace_csv(seed_file(cfg.output_dir, "trace", s.seed, ".csv"), s.result.trace);
            write_json(seed_file(cfg.output_dir, "summary", s.seed, ".json"), seed_summary(cfg, env.get(), s));
            if (net && !s.aborted && cfg.save_checkpoints) {
                net->save_checkpoint(seed_file(cfg.output_dir, "checkpoint", s.seed, ".bin"), cfg.space);
            }
            std::lock_guard lock(mu);
            if (env && !optimum_known) {
                optimum = optimum_for(cfg, env.get());
                optimum_known = true;
            }
            log << "seed " << s.seed << ": ";
            if (s.aborted) log << "ABORTED (" << s.error << ") ";
            if (!s.result.best_design.indices.empty()) {
                log << "best " << format_real(s.result.best_reward) << " at " << cfg.space.describe(s.result.best_design)
                    << ' ';
            }
            log << "after " << s.result.evaluations << " evaluations";
            if (optimum && !s.result.best_design.indices.empty()) {
                log << (reached(s.result.best_reward, *optimum) ? ", optimum reached" : ", optimum not reached");
            }
            log << '\n' << std::flush;
        }
    };

    std::exception_ptr failure;
    jobs = std::max<std::size_t>(1, std::min(jobs, cfg.seeds.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> errors(jobs);
        for (std::size_t t = 0; t < jobs; ++t) {
            threads.emplace_back([&, t] {
                try {
                    worker();
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& t : threads) t.join();
        for (auto& e : errors) {
            if (e && !failure) failure = e;
        }
    }
    if (failure) std::rethrow_exception(failure);

    const json agg = aggregate(cfg, optimum, outcomes);
    write_json((fs::path(cfg.output_dir) / "aggregate.json").string(), agg);
    if (agg.contains("seeds_reaching_optimum")) {
        log << "seeds reaching optimum: " << agg["seeds_reaching_optimum"].get<std::size_t>() << "/"
            << outcomes.size() << '\n';
    }
    log << "artifacts in " << cfg.output_dir << '\n';
    const bool any_aborted = std::any_of(outcomes.begin(), outcomes.end(), [](const auto& s) { return s.aborted; });
    return any_aborted ? 1 : 0;
}

namespace {

struct LoadedAggregate {
    std::string label;
    json doc;
};

std::string fmt_opt(const json& v) { return v.is_null() ? std::string() : format_real(v.get<double>()); }

}  // namespace

int compare_experiments(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
    if (opts.dirs.size() < 2) {
        err << "error: compare needs at least two trace directories\n";
        return 2;
    }
    std::vector<LoadedAggregate> runs;
    std::map<std::string, int> label_uses;
    for (const auto& dir : opts.dirs) {
        const fs::path p = fs::path(dir) / "aggregate.json";
        std::ifstream in(p);
        if (!in) {
            err << "error: no aggregate.json in '" << dir << "'\n";
            return 2;
        }
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || doc.value("schema", "") != kAggregateSchema ||
            doc.value("version", 0) != 1 || !doc.contains("budgets") || !doc["budgets"].is_array() ||
            !doc.contains("seeds") || !doc["seeds"].is_array() || !doc.contains("space")) {
            err << "error: '" << p.string() << "' does not follow the aggregate schema\n";
            return 2;
        }
        std::string label = doc.value("label", doc.value("method", "run"));
        if (const int n = ++label_uses[label]; n > 1) label += "#" + std::to_string(n);
        runs.push_back({label, std::move(doc)});
    }
    const std::string hash = runs.front().doc["space"].value("hash", "");
    for (const auto& r : runs) {
        if (r.doc["space"].value("hash", "") != hash) {
            err << "error: runs explore different design spaces\n";
            return 2;
        }
    }

    std::set<std::uint64_t> budget_set;
    std::vector<std::map<std::uint64_t, json>> by_budget(runs.size());
    for (std::size_t k = 0; k < runs.size(); ++k) {
        for (const auto& row : runs[k].doc["budgets"]) {
            const auto b = row.at("evaluations").get<std::uint64_t>();
            budget_set.insert(b);
            by_budget[k][b] = row;
        }
    }

    std::ofstream csv(opts.merged_csv);
    if (!csv) {
        err << "error: cannot write '" << opts.merged_csv << "'\n";
        return 1;
    }
    csv << "evaluations";
    for (const auto& r : runs) csv << ',' << r.label << "_median," << r.label << "_min," << r.label << "_max";
    csv << '\n';
    for (std::uint64_t b : budget_set) {
        csv << b;
        for (std::size_t k = 0; k < runs.size(); ++k) {
            auto it = by_budget[k].find(b);
            if (it == by_budget[k].end()) {
                csv << ",,,";
            } else {
                csv << ',' << fmt_opt(it->second["median"]) << ',' << fmt_opt(it->second["min"]) << ','
                    << fmt_opt(it->second["max"]);
            }
        }
        csv << '\n';
    }

    for (std::size_t k = 0; k < runs.size(); ++k) {
        const json& doc = runs[k].doc;
        std::optional<double> threshold = opts.threshold;
        if (!threshold && doc["optimum_reward"].is_number()) threshold = doc["optimum_reward"].get<double>();
        std::vector<double> finals;
        for (const auto& s : doc["seeds"]) {
            if (s["best_reward"].is_number()) finals.push_back(s["best_reward"].get<double>());
        }
        out << runs[k].label << " (" << doc.value("method", "?") << "): seeds=" << doc["seeds"].size();
        if (doc.contains("seeds_reaching_optimum")) {
            out << " reached_optimum=" << doc["seeds_reaching_optimum"].get<std::size_t>() << "/" << doc["seeds"].size();
        }
        out << " median_final_best=" << (finals.empty() ? std::string("n/a") : format_real(median(finals)));
        if (threshold) {
            std::string hit = "never";
            for (const auto& [b, row] : by_budget[k]) {
                if (row["median"].is_number() && reached(row["median"].get<double>(), *threshold)) {
                    hit = std::to_string(b);
                    break;
                }
            }
            out << " samples_to_threshold(" << format_real(*threshold) << ")=" << hit;
        }
        out << '\n';
    }
    out << "merged curves written to " << opts.merged_csv << '\n';
    return 0;
}

}  // namespace theta
