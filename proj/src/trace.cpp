#include "theta/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "theta/errors.hpp"

namespace theta {

namespace {

// from_chars keeps subnormals that stod would reject as out of range.
template <class T>
bool parse_number(const std::string& cell, T& out) {
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, out);
    return ptr == end && ec == std::errc{};
}

}  // namespace

bool RunTrace::best_at(std::uint64_t budget, double& best) const {
    bool found = false;
    for (const auto& r : rows) {
        if (r.evaluations <= budget) {
            best = found ? std::max(best, r.best_reward) : r.best_reward;
            found = true;
        }
    }
    return found;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
    out << kTraceHeader << '\n';
    for (const auto& r : trace.rows) {
        out << r.cycle << ',' << r.evaluations << ',' << format_real(r.batch_mean_reward) << ','
            << format_real(r.running_reward) << ',' << format_real(r.best_reward) << ',' << format_real(r.beta_e)
            << ',' << format_real(r.loss_u) << ',' << format_real(r.loss_kl) << ',' << format_real(r.loss_e) << ','
            << r.anomaly_count << '\n';
    }
}

void write_trace_csv(const std::string& path, const RunTrace& trace) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write trace '" + path + "'");
    }
    write_trace_csv(out, trace);
}

RunTrace read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kTraceHeader) {
        throw ParseError("trace CSV header does not match the RunTrace schema");
    }
    RunTrace trace;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 10) {
            throw ParseError("trace CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                             " fields, expected 10");
        }
        TraceRow r;
        const bool ok = parse_number(cells[0], r.cycle) && parse_number(cells[1], r.evaluations) &&
                        parse_number(cells[2], r.batch_mean_reward) && parse_number(cells[3], r.running_reward) &&
                        parse_number(cells[4], r.best_reward) && parse_number(cells[5], r.beta_e) &&
                        parse_number(cells[6], r.loss_u) && parse_number(cells[7], r.loss_kl) &&
                        parse_number(cells[8], r.loss_e) && parse_number(cells[9], r.anomaly_count);
        if (!ok) {
            throw ParseError("trace CSV line " + std::to_string(lineno) + " has a malformed number");
        }
        trace.rows.push_back(r);
    }
    return trace;
}

RunTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open trace '" + path + "'");
    }
    return read_trace_csv(in);
}

}  // namespace theta
