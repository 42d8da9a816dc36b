#include "coderefine/execution.hpp"

#include "coderefine/util.hpp"

#include "coderefine/jsonl.hpp"

#include <map>

namespace coderefine {

ExecutorLimits ExecutorLimits::from_config(const Config& cfg) {
    ExecutorLimits l;
    l.per_test_timeout = cfg.per_test_timeout;
    l.suite_timeout = cfg.suite_timeout;
    l.max_parallel_workers = cfg.executor_parallelism;
    l.max_output_bytes = cfg.max_output_bytes;
    return l;
}

void ExecutorLimits::validate() const {
    if (per_test_timeout <= Millis{0} || suite_timeout <= Millis{0}) throw ContractViolation("timeouts must be positive");
    if (per_test_timeout > suite_timeout) throw ContractViolation("per_test_timeout must not exceed suite_timeout");
    if (max_parallel_workers < 1) throw ContractViolation("max_parallel_workers must be at least 1");
}

std::string classify_error(const RawOutcome& raw) {
    if (raw.status == TestStatus::timeout) return "timeout";
    if (raw.status == TestStatus::crash) return "crash";
    static const std::map<std::string, std::string> fixed = {
        {"AssertionError", "assertion-failure"},
        {"TypeError", "type-error"},
        {"NameError", "name-error"},
        {"SyntaxError", "syntax-error"},
        {"TimeoutError", "timeout"},
    };
    if (!raw.error_class || raw.error_class->empty())
        return raw.status == TestStatus::fail ? "assertion-failure" : "runtime-error:unknown";
    if (auto it = fixed.find(*raw.error_class); it != fixed.end()) return it->second;
    return "runtime-error:" + *raw.error_class;
}

TestOutcome make_outcome(const std::string& fingerprint, const RawOutcome& raw, std::size_t max_output_bytes) {
    TestOutcome o;
    o.test_fingerprint = fingerprint;
    o.status = raw.status;
    o.duration = raw.duration;
    if (raw.status != TestStatus::pass) {
        o.error_type = classify_error(raw);
        if (raw.message) o.message = raw.message->substr(0, max_output_bytes);
    }
    return o;
}

ExecutionReport Executor::run_suite(const CandidateSolution& solution, std::span<const TestCase> tests,
                                    const ExecutorLimits& limits) {
    if (tests.empty()) throw ContractViolation("run_suite called with an empty test suite");
    limits.validate();
    auto raws = execute(solution, tests, limits);
    if (raws.size() != tests.size()) throw std::runtime_error("executor returned a misaligned outcome list");
    std::vector<TestOutcome> outcomes;
    outcomes.reserve(tests.size());
    for (std::size_t i = 0; i < tests.size(); ++i)
        outcomes.push_back(make_outcome(tests[i].fingerprint, raws[i], limits.max_output_bytes));
    return ExecutionReport::from_outcomes(solution.id(), std::move(outcomes));
}

double pass_rate(const ExecutionReport& report) {
    if (report.total <= 0) throw ContractViolation("pass_rate of an empty report");
    return static_cast<double>(report.pass_count) / static_cast<double>(report.total);
}

std::size_t select_best(std::span<const ExecutionReport> reports) {
    if (reports.empty()) throw ContractViolation("select_best on empty input");
    for (const auto& r : reports)
        if (r.total <= 0) throw ContractViolation("select_best on a report with no outcomes");
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        const auto lhs = static_cast<long long>(reports[i].pass_count) * reports[best].total;
        const auto rhs = static_cast<long long>(reports[best].pass_count) * reports[i].total;
        if (lhs > rhs) best = i;
    }
    return best;
}

TableExecutor::TableExecutor(std::vector<Rule> rules, RawOutcome fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

RawOutcome TableExecutor::default_fallback() {
    RawOutcome o;
    o.status = TestStatus::fail;
    o.error_class = "AssertionError";
    o.message = "AssertionError";
    return o;
}

namespace {

RawOutcome outcome_from_json(const Json& j) {
    RawOutcome o;
    o.status = status_from_string(j.value("status", std::string("pass")));
    if (j.contains("error_class")) o.error_class = j.at("error_class").get<std::string>();
    if (j.contains("message")) o.message = j.at("message").get<std::string>();
    if (o.status != TestStatus::pass && !o.message) o.message = o.error_class.value_or(to_string(o.status));
    return o;
}

bool pattern_matches(const std::string& pattern, const std::string& text) {
    return pattern.empty() || pattern == "*" || text.find(pattern) != std::string::npos;
}

}  // namespace

TableExecutor TableExecutor::from_jsonl_text(const std::string& text) {
    TableExecutor ex;
    for (const auto& j : parse_jsonl(text, "outcome table")) {
        if (j.value("default", false)) {
            ex.fallback_ = outcome_from_json(j);
        } else {
            ex.rules_.push_back(Rule{j.value("solution", std::string("*")), j.value("test", std::string("*")),
                                     outcome_from_json(j)});
        }
    }
    return ex;
}

TableExecutor TableExecutor::from_jsonl(const std::string& path) { return from_jsonl_text(read_file(path)); }

RawOutcome TableExecutor::lookup(const std::string& solution, const std::string& test) const {
    for (const auto& r : rules_)
        if (pattern_matches(r.solution_pattern, solution) && pattern_matches(r.test_pattern, test)) return r.outcome;
    return fallback_;
}

std::vector<RawOutcome> TableExecutor::execute(const CandidateSolution& solution, std::span<const TestCase> tests,
                                               const ExecutorLimits&) {
    std::vector<RawOutcome> out;
    out.reserve(tests.size());
    for (const auto& t : tests) out.push_back(lookup(solution.source, t.source));
    executed_ += tests.size();
    return out;
}

}  // namespace coderefine
