#pragma once

#include "coderefine/core.hpp"
#include "coderefine/fingerprint.hpp"
#include "coderefine/util.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace coderefine {

// Insertion-ordered set of self-generated tests keyed by fingerprint. Tests
// are never removed.
class TestingPool {
public:
    // Inserts tests whose fingerprint is unseen; returns how many were added.
    // Throws ContractViolation if a test has no fingerprint.
    std::size_t add_tests(std::span<const TestCase> new_tests);

    const std::vector<TestCase>& tests() const { return tests_; }
    std::size_t size() const { return tests_.size(); }
    bool empty() const { return tests_.empty(); }
    bool contains(const std::string& fingerprint) const { return index_.contains(fingerprint); }

    void record_report(const ExecutionReport& report);
    const ExecutionReport* report_for(const std::string& solution_ref) const;

    // JSON-lines of {source, category, fingerprint, origin_iteration}.
    std::string snapshot_jsonl() const;

private:
    std::vector<TestCase> tests_;
    std::unordered_set<std::string> index_;
    std::map<std::string, ExecutionReport> last_report_by_solution_;
};

// Fills every fingerprint and drops later duplicates, preserving order.
std::vector<TestCase> dedup_tests(std::vector<TestCase> tests, Normalizer& normalizer);

// Uniformly samples min(m, available) pool tests that `best_report` marks as
// passing. Returned in pool order. Empty when there is no report.
std::vector<TestCase> sample_passing_tests(const TestingPool& pool, const ExecutionReport* best_report, int m,
                                           Rng& rng);

struct ErrorTarget {
    TestCase test;
    std::string error_type;
    std::string feedback;
};

std::string format_feedback(const TestOutcome& outcome);

// Picks an error type not yet in `seen` uniformly, then one failing test of
// that type uniformly, and records the type in `seen`. When every failing type
// has been seen, `seen` is cleared and the pick is made again.
std::optional<ErrorTarget> next_error_target(const TestingPool& pool, const ExecutionReport* best_report,
                                             std::set<std::string>& seen, Rng& rng);

}  // namespace coderefine
