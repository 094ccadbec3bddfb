#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "theta/design_space.hpp"
#include "theta/errors.hpp"

namespace theta {

struct TraceRow {
    std::uint64_t cycle = 0;
    std::uint64_t evaluations = 0;  // cumulative
    double batch_mean_reward = 0.0;
    double running_reward = 0.0;
    double best_reward = 0.0;
    double beta_e = 0.0;
    double loss_u = 0.0;
    double loss_kl = 0.0;
    double loss_e = 0.0;
    std::uint64_t anomaly_count = 0;

    bool operator==(const TraceRow&) const = default;
};

// Append-only run record shared by the resonance engine and the GA.
struct RunTrace {
    std::vector<TraceRow> rows;

    // Best reward among rows with evaluations <= budget; false if none.
    bool best_at(std::uint64_t budget, double& best) const;
};

// Outcome of one search run (resonance or GA).
struct RunResult {
    RunTrace trace;
    DesignPoint best_design;
    double best_reward = 0.0;
    std::uint64_t evaluations = 0;
    std::vector<std::string> warnings;
};

// Thrown when a run stops early on an environment failure. Carries the
// trace accumulated up to that point.
class RunAborted : public Error {
public:
    RunAborted(const std::string& what, RunResult partial) : Error(what), partial_(std::move(partial)) {}
    const RunResult& partial() const { return partial_; }

private:
    RunResult partial_;
};

inline constexpr const char* kTraceHeader =
    "cycle,evaluations,batch_mean_reward,running_reward,best_reward,beta_e,loss_u,loss_kl,loss_e,anomaly_count";

// Reals use %.17g so a written trace reads back bit-exactly.
void write_trace_csv(std::ostream& out, const RunTrace& trace);
void write_trace_csv(const std::string& path, const RunTrace& trace);
RunTrace read_trace_csv(std::istream& in);
RunTrace read_trace_csv(const std::string& path);

std::string format_real(double v);

}  // namespace theta
