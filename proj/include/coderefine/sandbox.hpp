#pragma once

#include "coderefine/execution.hpp"
#include "coderefine/fingerprint.hpp"
#include "coderefine/jsonl.hpp"

#include <memory>
#include <semaphore>
#include <string>
#include <vector>

namespace coderefine {

// Wire format spoken with the in-sandbox runner: one JSON request on stdin,
// one JSON line on stdout.
namespace harness {

inline constexpr int kProtocolVersion = 1;

struct Response {
    TestStatus status = TestStatus::pass;
    std::optional<std::string> error_class;
    std::optional<std::string> message;
    std::vector<std::string> traceback_tail;
    std::optional<std::string> tree_fingerprint;
    long long duration_ms = 0;
};

std::string run_request(std::string_view solution_source, std::string_view test_source, Millis timeout);
std::string normalize_request(std::string_view test_source, Millis timeout);

// Throws std::runtime_error on anything but a well-formed v1 response.
Response parse_response(std::string_view line);

}  // namespace harness

struct ProcessResult {
    std::optional<std::string> first_line;
    int exit_code = -1;
    bool timed_out = false;
    bool spawn_failed = false;
    std::string diagnostic;
};

// Spawns argv, feeds `input` on stdin, and collects the first stdout line.
// The child is killed once `deadline` elapses. Lines longer than
// `max_line_bytes` are treated as protocol garbage.
ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input, Millis deadline,
                          std::size_t max_line_bytes = 1 << 20);

// One fresh harness process per test. Parallelism per suite is bounded by
// ExecutorLimits::max_parallel_workers and across suites by the global budget.
class SandboxExecutor final : public Executor {
public:
    explicit SandboxExecutor(std::vector<std::string> harness_command, int global_worker_budget = 8,
                             Millis kill_grace = Millis{500});

    RawOutcome run_one(const std::string& solution, const std::string& test, Millis timeout);

protected:
    std::vector<RawOutcome> execute(const CandidateSolution& solution, std::span<const TestCase> tests,
                                    const ExecutorLimits& limits) override;

private:
    std::vector<std::string> command_;
    Millis kill_grace_;
    std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

// Asks the harness for a syntax-tree fingerprint; any failure yields nullopt
// so the caller falls back to the lexical grade.
class SandboxNormalizer final : public Normalizer {
public:
    explicit SandboxNormalizer(std::vector<std::string> harness_command, Millis timeout = Millis{5000});
    std::optional<std::string> tree_fingerprint(std::string_view source) override;

private:
    std::vector<std::string> command_;
    Millis timeout_;
};

}  // namespace coderefine
