#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "theta/design_space.hpp"
#include "theta/envs.hpp"

namespace theta {

struct EvaluatorOptions {
    std::vector<std::string> command;  // argv; command[0] is looked up on PATH
    std::chrono::milliseconds timeout{300000};
};

// One child process speaking the newline-delimited JSON protocol over its
// stdin/stdout. Single-flight: one request in the air at a time.
class EvaluatorProcess {
public:
    // Spawns and handshakes. Throws EnvironmentFailure if either fails.
    EvaluatorProcess(const DesignSpace& space, EvaluatorOptions options);
    ~EvaluatorProcess();

    EvaluatorProcess(const EvaluatorProcess&) = delete;
    EvaluatorProcess& operator=(const EvaluatorProcess&) = delete;

    EvalResult evaluate(const DesignPoint& design);

    int pid() const { return pid_; }

private:
    void spawn();
    void handshake();
    void terminate();
    void send_line(const std::string& line);
    // False on timeout; throws EnvironmentFailure on EOF.
    bool read_line(std::string& line, std::chrono::steady_clock::time_point deadline);

    DesignSpace space_;
    EvaluatorOptions options_;
    int pid_ = -1;
    int fd_ = -1;
    std::string buffer_;
    std::uint64_t next_id_ = 1;
};

// Convenience wrapper over an already running, handshaken process.
EvalResult evaluate_external(const DesignPoint& design, EvaluatorProcess& channel);

// Pool of evaluator processes. evaluate_batch fans out across workers and
// keeps results in input order.
class ExternalEnvironment final : public Environment {
public:
    ExternalEnvironment(DesignSpace space, EvaluatorOptions options, std::size_t workers = 1);

    const DesignSpace& space() const override { return space_; }
    EvalResult evaluate(const DesignPoint& design) override;
    std::vector<EvalResult> evaluate_batch(std::span<const DesignPoint> designs) override;

    std::size_t workers() const { return pool_.size(); }

private:
    DesignSpace space_;
    std::vector<std::unique_ptr<EvaluatorProcess>> pool_;
};

}  // namespace theta
