#pragma once

#include "coderefine/core.hpp"

#include <atomic>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coderefine {

struct ExecutorLimits {
    Millis per_test_timeout{2000};
    Millis suite_timeout{60000};
    int max_parallel_workers = 4;
    std::size_t max_output_bytes = 4096;

    static ExecutorLimits from_config(const Config& cfg);
    void validate() const;
};

// What a runner reports for one test before classification.
struct RawOutcome {
    TestStatus status = TestStatus::pass;
    std::optional<std::string> error_class;
    std::optional<std::string> message;
    Millis duration{0};
};

// Stable error label: fixed names for the common classes, timeout and crash
// from the status, "runtime-error:<class>" for everything else.
std::string classify_error(const RawOutcome& raw);

TestOutcome make_outcome(const std::string& fingerprint, const RawOutcome& raw, std::size_t max_output_bytes);

class Executor {
public:
    virtual ~Executor() = default;

    // Outcomes follow the order of `tests`. Throws ContractViolation on an
    // empty suite.
    ExecutionReport run_suite(const CandidateSolution& solution, std::span<const TestCase> tests,
                              const ExecutorLimits& limits);

protected:
    // One raw outcome per test, aligned with `tests`.
    virtual std::vector<RawOutcome> execute(const CandidateSolution& solution, std::span<const TestCase> tests,
                                            const ExecutorLimits& limits) = 0;
};

// pass_count / total exactly. Throws ContractViolation when total is 0.
double pass_rate(const ExecutionReport& report);

// Smallest index attaining the maximum pass rate. Rates are compared as exact
// fractions. Throws ContractViolation on empty input.
std::size_t select_best(std::span<const ExecutionReport> reports);

// Table-driven executor. Rules are matched in order; the first rule whose
// solution pattern and test pattern are both substrings of the respective
// sources wins. "*" or an empty pattern matches anything.
class TableExecutor final : public Executor {
public:
    struct Rule {
        std::string solution_pattern;
        std::string test_pattern;
        RawOutcome outcome;
    };

    TableExecutor() = default;
    explicit TableExecutor(std::vector<Rule> rules, RawOutcome fallback = default_fallback());
    TableExecutor(TableExecutor&& other) noexcept
        : rules_(std::move(other.rules_)), fallback_(std::move(other.fallback_)), executed_(other.executed_.load()) {}

    // JSON-lines: {"solution": ..., "test": ..., "status": ..., "error_class": ..., "message": ...}.
    // A record with "default": true sets the fallback outcome.
    static TableExecutor from_jsonl(const std::string& path);
    static TableExecutor from_jsonl_text(const std::string& text);

    static RawOutcome default_fallback();

    void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }
    std::size_t tests_executed() const { return executed_.load(); }

protected:
    std::vector<RawOutcome> execute(const CandidateSolution& solution, std::span<const TestCase> tests,
                                    const ExecutorLimits& limits) override;

private:
    RawOutcome lookup(const std::string& solution, const std::string& test) const;

    std::vector<Rule> rules_;
    RawOutcome fallback_ = default_fallback();
    std::atomic<std::size_t> executed_{0};
};

}  // namespace coderefine
