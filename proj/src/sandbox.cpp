#include "coderefine/sandbox.hpp"

#include "coderefine/util.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>

extern char** environ;

namespace coderefine {

namespace harness {

std::string run_request(std::string_view solution_source, std::string_view test_source, Millis timeout) {
    OrderedJson j;
    j["v"] = kProtocolVersion;
    j["mode"] = "run";
    j["solution_source"] = solution_source;
    j["test_source"] = test_source;
    j["timeout_ms"] = timeout.count();
    return j.dump() + "\n";
}

std::string normalize_request(std::string_view test_source, Millis timeout) {
    OrderedJson j;
    j["v"] = kProtocolVersion;
    j["mode"] = "normalize";
    j["test_source"] = test_source;
    j["timeout_ms"] = timeout.count();
    return j.dump() + "\n";
}

Response parse_response(std::string_view line) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::exception& e) {
        throw std::runtime_error(std::string("harness response is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("harness response is not an object");
    if (j.value("v", 0) != kProtocolVersion) throw std::runtime_error("unsupported harness protocol version");
    Response r;
    try {
        r.status = status_from_string(j.at("status").get<std::string>());
        auto opt = [&](const char* key) -> std::optional<std::string> {
            if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
            return j.at(key).get<std::string>();
        };
        r.error_class = opt("error_class");
        r.message = opt("message");
        r.tree_fingerprint = opt("tree_fingerprint");
        if (j.contains("traceback_tail") && !j.at("traceback_tail").is_null()) {
            const auto& tb = j.at("traceback_tail");
            if (tb.is_array()) {
                for (const auto& f : tb) r.traceback_tail.push_back(f.get<std::string>());
            } else {
                r.traceback_tail.push_back(tb.get<std::string>());
            }
        }
        r.duration_ms = j.value("duration_ms", 0LL);
    } catch (const Json::exception& e) {
        throw std::runtime_error(std::string("malformed harness response: ") + e.what());
    }
    return r;
}

}  // namespace harness

namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe() {
        if (::pipe2(fd, O_CLOEXEC) != 0) throw std::runtime_error(std::string("pipe2: ") + std::strerror(errno));
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    Pipe(const Pipe&) = delete;
    Pipe& operator=(const Pipe&) = delete;
    void close_read() {
        if (fd[0] >= 0) ::close(fd[0]);
        fd[0] = -1;
    }
    void close_write() {
        if (fd[1] >= 0) ::close(fd[1]);
        fd[1] = -1;
    }
};

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    return static_cast<int>(std::clamp<long long>(left, 0, 1 << 30));
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input, Millis deadline_after,
                          std::size_t max_line_bytes) {
    ignore_sigpipe();
    ProcessResult result;
    if (argv.empty()) {
        result.spawn_failed = true;
        result.diagnostic = "empty harness command";
        return result;
    }

    Pipe in_pipe;
    Pipe out_pipe;

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe.fd[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe.fd[1], STDOUT_FILENO);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);

    std::vector<char*> cargv;
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, cargv[0], &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        result.spawn_failed = true;
        result.diagnostic = "spawn of '" + argv[0] + "' failed: " + std::strerror(rc);
        return result;
    }
    in_pipe.close_read();
    out_pipe.close_write();
    ::fcntl(in_pipe.fd[1], F_SETFL, O_NONBLOCK);
    ::fcntl(out_pipe.fd[0], F_SETFL, O_NONBLOCK);

    const auto deadline = Clock::now() + deadline_after;
    std::size_t written = 0;
    if (input.empty()) in_pipe.close_write();
    std::string buffer;
    bool eof = false;
    bool got_line = false;

    while (!eof && !got_line) {
        pollfd fds[2];
        nfds_t nfds = 0;
        fds[nfds++] = {out_pipe.fd[0], POLLIN, 0};
        if (in_pipe.fd[1] >= 0) fds[nfds++] = {in_pipe.fd[1], POLLOUT, 0};
        const int wait = remaining_ms(deadline);
        if (wait == 0) {
            result.timed_out = true;
            break;
        }
        const int ready = ::poll(fds, nfds, wait);
        if (ready < 0) {
            if (errno == EINTR) continue;
            result.diagnostic = std::string("poll: ") + std::strerror(errno);
            break;
        }
        if (ready == 0) {
            result.timed_out = true;
            break;
        }
        if (nfds > 1 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
            const auto n = ::write(in_pipe.fd[1], input.data() + written, input.size() - written);
            if (n > 0) written += static_cast<std::size_t>(n);
            if (n < 0 && errno != EAGAIN && errno != EINTR) written = input.size();
            if (written >= input.size()) in_pipe.close_write();
        }
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            char chunk[4096];
            const auto n = ::read(out_pipe.fd[0], chunk, sizeof chunk);
            if (n > 0) {
                buffer.append(chunk, static_cast<std::size_t>(n));
                if (auto nl = buffer.find('\n'); nl != std::string::npos) {
                    result.first_line = buffer.substr(0, nl);
                    got_line = true;
                } else if (buffer.size() > max_line_bytes) {
                    result.diagnostic = "harness output exceeded line limit";
                    break;
                }
            } else if (n == 0) {
                eof = true;
            } else if (errno != EAGAIN && errno != EINTR) {
                eof = true;
            }
        }
    }
    if (eof && !got_line && !buffer.empty()) result.first_line = buffer;
    in_pipe.close_write();
    out_pipe.close_read();

    // Reap, killing the child if it lingers past the deadline.
    int status = 0;
    for (;;) {
        const pid_t w = ::waitpid(pid, &status, WNOHANG);
        if (w == pid) break;
        if (w < 0 && errno != EINTR) break;
        if (result.timed_out || remaining_ms(deadline) == 0) {
            ::kill(pid, SIGKILL);
            ::waitpid(pid, &status, 0);
            if (!got_line) result.timed_out = true;
            break;
        }
        ::usleep(1000);
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    }
    if (result.exit_code == 127 && !result.first_line) {
        result.spawn_failed = true;
        result.diagnostic = "harness command '" + argv[0] + "' could not be executed";
    }
    return result;
}

SandboxExecutor::SandboxExecutor(std::vector<std::string> harness_command, int global_worker_budget,
                                 Millis kill_grace)
    : command_(std::move(harness_command)),
      kill_grace_(kill_grace),
      slots_(std::make_unique<std::counting_semaphore<1024>>(std::clamp(global_worker_budget, 1, 1024))) {}

RawOutcome SandboxExecutor::run_one(const std::string& solution, const std::string& test, Millis timeout) {
    const auto started = Clock::now();
    slots_->acquire();
    ProcessResult pr;
    try {
        pr = run_process(command_, harness::run_request(solution, test, timeout), timeout + kill_grace_);
    } catch (...) {
        slots_->release();
        throw;
    }
    slots_->release();

    RawOutcome out;
    out.duration = std::chrono::duration_cast<Millis>(Clock::now() - started);
    if (pr.first_line) {
        try {
            const auto resp = harness::parse_response(*pr.first_line);
            out.status = resp.status;
            out.error_class = resp.error_class;
            std::string msg = resp.message.value_or("");
            for (const auto& frame : resp.traceback_tail) msg += (msg.empty() ? "" : "\n") + frame;
            if (!msg.empty()) out.message = msg;
            if (resp.duration_ms > 0) out.duration = Millis{resp.duration_ms};
            return out;
        } catch (const std::exception& e) {
            pr.diagnostic = e.what();
        }
    }
    if (pr.timed_out) {
        out.status = TestStatus::timeout;
        out.message = "killed after " + std::to_string(timeout.count()) + " ms";
        return out;
    }
    out.status = TestStatus::crash;
    out.message = pr.diagnostic.empty() ? "harness exited with code " + std::to_string(pr.exit_code) + " and no response"
                                        : pr.diagnostic;
    return out;
}

std::vector<RawOutcome> SandboxExecutor::execute(const CandidateSolution& solution, std::span<const TestCase> tests,
                                                 const ExecutorLimits& limits) {
    const auto suite_deadline = Clock::now() + limits.suite_timeout;
    std::vector<RawOutcome> out(tests.size());
    parallel_for(tests.size(), static_cast<std::size_t>(limits.max_parallel_workers), [&](std::size_t i) {
        const auto left = std::chrono::duration_cast<Millis>(suite_deadline - Clock::now());
        if (left <= Millis{0}) {
            out[i].status = TestStatus::timeout;
            out[i].message = "suite timeout exceeded before the test started";
            return;
        }
        out[i] = run_one(solution.source, tests[i].source, std::min(limits.per_test_timeout, left));
    });
    return out;
}

SandboxNormalizer::SandboxNormalizer(std::vector<std::string> harness_command, Millis timeout)
    : command_(std::move(harness_command)), timeout_(timeout) {}

std::optional<std::string> SandboxNormalizer::tree_fingerprint(std::string_view source) {
    const auto pr = run_process(command_, harness::normalize_request(source, timeout_), timeout_ + Millis{500});
    if (!pr.first_line) return std::nullopt;
    try {
        const auto resp = harness::parse_response(*pr.first_line);
        if (resp.status != TestStatus::pass || !resp.tree_fingerprint || resp.tree_fingerprint->empty())
            return std::nullopt;
        return resp.tree_fingerprint;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace coderefine
