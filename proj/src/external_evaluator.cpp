#include "theta/external_evaluator.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <thread>

#include "json.hpp"
#include "theta/errors.hpp"

extern char** environ;

namespace theta {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr auto kHandshakeTimeout = std::chrono::seconds(30);

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

}  // namespace

EvaluatorProcess::EvaluatorProcess(const DesignSpace& space, EvaluatorOptions options)
    : space_(space), options_(std::move(options)) {
    if (options_.command.empty()) {
        throw ConfigError("evaluator command is empty");
    }
    if (options_.timeout.count() <= 0) {
        throw ConfigError("evaluator timeout must be positive");
    }
    spawn();
    try {
        handshake();
    } catch (...) {
        terminate();
        throw;
    }
}

EvaluatorProcess::~EvaluatorProcess() { terminate(); }

void EvaluatorProcess::spawn() {
    int fds[2];
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
        throw EnvironmentFailure(sys_error("socketpair"));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

    std::vector<char*> argv;
    for (auto& a : options_.command) {
        argv.push_back(a.data());
    }
    argv.push_back(nullptr);

    pid_t pid = -1;
    const int rc = posix_spawnp(&pid, argv[0], &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(fds[1]);
    if (rc != 0) {
        close(fds[0]);
        throw EnvironmentFailure("cannot start evaluator '" + options_.command[0] + "': " + std::strerror(rc));
    }
    pid_ = pid;
    fd_ = fds[0];
    buffer_.clear();
}

void EvaluatorProcess::terminate() {
    if (fd_ >= 0) {
        shutdown(fd_, SHUT_RDWR);
        close(fd_);
        fd_ = -1;
    }
    if (pid_ > 0) {
        // Give a well-behaved evaluator a moment to exit on EOF.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

void EvaluatorProcess::send_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
        const ssize_t n = send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw EnvironmentFailure(sys_error("evaluator write failed"));
        }
        sent += static_cast<std::size_t>(n);
    }
}

bool EvaluatorProcess::read_line(std::string& line, Clock::time_point deadline) {
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return true;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (left.count() <= 0) {
            return false;
        }
        pollfd p{fd_, POLLIN, 0};
        const int rc = poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw EnvironmentFailure(sys_error("evaluator poll failed"));
        }
        if (rc == 0) {
            continue;
        }
        char chunk[4096];
        const ssize_t n = recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw EnvironmentFailure(sys_error("evaluator read failed"));
        }
        if (n == 0) {
            throw EnvironmentFailure("evaluator closed its output (process exited?)");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void EvaluatorProcess::handshake() {
    const json hello{{"protocol", "theta-dse-eval"}, {"version", 1}, {"space_hash", space_.hash()}};
    send_line(hello.dump());
    std::string line;
    if (!read_line(line, Clock::now() + std::min<Clock::duration>(kHandshakeTimeout, options_.timeout))) {
        throw EnvironmentFailure("evaluator handshake timed out");
    }
    const json reply = json::parse(line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || reply.value("ok", false) != true) {
        throw EnvironmentFailure("evaluator refused handshake: " + line);
    }
}

EvalResult EvaluatorProcess::evaluate(const DesignPoint& design) {
    if (fd_ < 0) {
        throw EnvironmentFailure("evaluator is not running");
    }
    const std::uint64_t id = next_id_++;
    send_line(json{{"id", id}, {"design", space_.to_wire(design)}}.dump());

    std::string line;
    if (!read_line(line, Clock::now() + options_.timeout)) {
        // A hung worker cannot be resynchronized; replace it.
        terminate();
        spawn();
        handshake();
        return EvalResult::anomaly("timeout");
    }
    const json reply = json::parse(line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object()) {
        return EvalResult::anomaly("protocol");
    }
    auto id_it = reply.find("id");
    if (id_it == reply.end() || !id_it->is_number_unsigned() || id_it->get<std::uint64_t>() != id) {
        return EvalResult::anomaly("protocol");
    }
    if (auto err = reply.find("error"); err != reply.end()) {
        return EvalResult::anomaly(err->is_string() ? err->get<std::string>() : err->dump());
    }
    auto obj = reply.find("objectives");
    if (obj == reply.end() || !obj->is_object()) {
        return EvalResult::anomaly("protocol");
    }
    Objectives out;
    for (const auto& [name, value] : obj->items()) {
        if (!value.is_number() || !std::isfinite(value.get<double>())) {
            return EvalResult::anomaly("protocol");
        }
        out[name] = value.get<double>();
    }
    return EvalResult::ok(std::move(out));
}

EvalResult evaluate_external(const DesignPoint& design, EvaluatorProcess& channel) {
    return channel.evaluate(design);
}

ExternalEnvironment::ExternalEnvironment(DesignSpace space, EvaluatorOptions options, std::size_t workers)
    : space_(std::move(space)) {
    if (workers == 0) {
        throw ConfigError("eval workers must be positive");
    }
    for (std::size_t i = 0; i < workers; ++i) {
        pool_.push_back(std::make_unique<EvaluatorProcess>(space_, options));
    }
}

EvalResult ExternalEnvironment::evaluate(const DesignPoint& design) { return pool_.front()->evaluate(design); }

std::vector<EvalResult> ExternalEnvironment::evaluate_batch(std::span<const DesignPoint> designs) {
    std::vector<EvalResult> results(designs.size());
    if (pool_.size() == 1 || designs.size() <= 1) {
        for (std::size_t i = 0; i < designs.size(); ++i) {
            results[i] = pool_.front()->evaluate(designs[i]);
        }
        return results;
    }
    // Worker w takes designs w, w+N, w+2N, ...
    const std::size_t n = std::min(pool_.size(), designs.size());
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < n; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < designs.size(); i += n) {
                    results[i] = pool_[w]->evaluate(designs[i]);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

}  // namespace theta
