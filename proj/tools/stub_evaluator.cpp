// Reference evaluator for the JSON-lines protocol. Objectives are constants
// plus linear terms in choice indices; a few switches inject faults.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "theta/design_space.hpp"

using nlohmann::json;

namespace {

struct LinearTerm {
    std::string objective;
    std::string dim;
    double coef;
};

struct Match {
    std::string dim;
    std::string label;
};

Match parse_match(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("expected DIM=LABEL, got '" + text + "'");
    return {text.substr(0, eq), text.substr(eq + 1)};
}

bool matches(const std::vector<Match>& rules, const json& design) {
    for (const auto& r : rules) {
        auto it = design.find(r.dim);
        if (it != design.end() && it->is_string() && it->get<std::string>() == r.label) return true;
    }
    return false;
}

void reply(const json& j) {
    std::cout << j.dump() << '\n' << std::flush;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stub evaluator"};
    std::string space_path;
    std::vector<std::string> objective_args, linear_args, reject_args, hang_args, wrong_id_args, malformed_args;
    long long crash_after = -1;
    bool refuse = false;
    app.add_option("--space", space_path, "design space JSON")->required();
    app.add_option("--objective", objective_args, "NAME=VALUE constant objective");
    app.add_option("--linear", linear_args, "NAME:DIM=COEF adds COEF * index(DIM) to NAME");
    app.add_option("--reject", reject_args, "DIM=LABEL answer with error \"rejected\"");
    app.add_option("--hang-on", hang_args, "DIM=LABEL never answer");
    app.add_option("--wrong-id-on", wrong_id_args, "DIM=LABEL answer with the wrong id");
    app.add_option("--malformed-on", malformed_args, "DIM=LABEL answer with a non-JSON line");
    app.add_option("--crash-after", crash_after, "exit after this many requests");
    app.add_flag("--refuse-handshake", refuse);
    CLI11_PARSE(app, argc, argv);

    theta::DesignSpace space = [&] {
        try {
            return theta::load_space(space_path);
        } catch (const std::exception& e) {
            std::cerr << "stub_evaluator: " << e.what() << '\n';
            std::exit(2);
        }
    }();

    std::map<std::string, double> constants;
    std::vector<LinearTerm> linear;
    std::vector<Match> reject, hang, wrong_id, malformed;
    try {
        for (const auto& a : objective_args) {
            const auto eq = a.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--objective " + a);
            constants[a.substr(0, eq)] = std::stod(a.substr(eq + 1));
        }
        for (const auto& a : linear_args) {
            const auto colon = a.find(':');
            const auto eq = a.find('=');
            if (colon == std::string::npos || eq == std::string::npos || eq < colon) {
                throw std::invalid_argument("--linear " + a);
            }
            linear.push_back({a.substr(0, colon), a.substr(colon + 1, eq - colon - 1), std::stod(a.substr(eq + 1))});
        }
        for (const auto& a : reject_args) reject.push_back(parse_match(a));
        for (const auto& a : hang_args) hang.push_back(parse_match(a));
        for (const auto& a : wrong_id_args) wrong_id.push_back(parse_match(a));
        for (const auto& a : malformed_args) malformed.push_back(parse_match(a));
    } catch (const std::exception& e) {
        std::cerr << "stub_evaluator: bad argument " << e.what() << '\n';
        return 2;
    }

    std::string line;
    if (!std::getline(std::cin, line)) return 0;
    const json hello = json::parse(line, nullptr, false);
    const bool hash_ok = hello.is_object() && hello.value("protocol", "") == "theta-dse-eval" &&
                         hello.value("space_hash", "") == space.hash();
    if (refuse || !hash_ok) {
        reply({{"ok", false}, {"error", hash_ok ? "refused" : "space mismatch"}});
        return 1;
    }
    reply({{"ok", true}});

    long long served = 0;
    while (std::getline(std::cin, line)) {
        if (crash_after >= 0 && served >= crash_after) {
            std::_Exit(3);
        }
        ++served;
        const json req = json::parse(line, nullptr, false);
        if (req.is_discarded() || !req.contains("id") || !req.contains("design")) {
            reply({{"id", nullptr}, {"error", "bad request"}});
            continue;
        }
        const json& id = req["id"];
        const json& design = req["design"];
        if (matches(hang, design)) {
            for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
        }
        if (matches(malformed, design)) {
            std::cout << "{not json\n" << std::flush;
            continue;
        }
        if (matches(wrong_id, design)) {
            reply({{"id", id.get<long long>() + 1000}, {"objectives", {{"score", 0.0}}}});
            continue;
        }
        if (matches(reject, design)) {
            reply({{"id", id}, {"error", "rejected"}});
            continue;
        }
        theta::DesignPoint x;
        try {
            x = space.from_wire(design);
        } catch (const std::exception& e) {
            reply({{"id", id}, {"error", e.what()}});
            continue;
        }
        json objectives = json::object();
        for (const auto& [name, v] : constants) objectives[name] = v;
        for (const auto& t : linear) {
            std::size_t i = 0;
            while (i < space.dimensions().size() && space.dimensions()[i].name != t.dim) ++i;
            if (i == space.dimensions().size()) {
                reply({{"id", id}, {"error", "unknown dimension " + t.dim}});
                goto next;
            }
            objectives[t.objective] = objectives.value(t.objective, 0.0) + t.coef * static_cast<double>(x.indices[i]);
        }
        reply({{"id", id}, {"objectives", objectives}});
    next:;
    }
    return 0;
}
