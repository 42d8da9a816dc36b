#pragma once

#include "coderefine/core.hpp"
#include "coderefine/execution.hpp"
#include "coderefine/jsonl.hpp"
#include "coderefine/refinement.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace coderefine {

enum class DatasetFormat { mbpp_jsonl, humaneval_jsonl };

DatasetFormat dataset_format_from_string(const std::string& s);
std::string to_string(DatasetFormat f);

struct LoadOptions {
    // MBPP convention: append the first ground-truth assert to the task text.
    bool mbpp_signature_hint = false;
};

// Throws std::runtime_error naming the offending line.
std::vector<Problem> load_dataset_text(const std::string& text, DatasetFormat format, const LoadOptions& options = {});
std::vector<Problem> load_dataset(const std::string& path, DatasetFormat format, const LoadOptions& options = {});

// Ground-truth tests as executable test cases (lexical fingerprints).
std::vector<TestCase> ground_truth_cases(const Problem& problem);

struct ScoreOutcome {
    bool solved = false;
    bool executor_failed = false;
    int passed = 0;
    int total = 0;
};

// Solved iff the solution passes every ground-truth test.
ScoreOutcome score_final(const Problem& problem, const std::optional<CandidateSolution>& solution, Executor& executor,
                         const ExecutorLimits& limits);

// Fraction of problems where any of the first k samples passes. Throws
// ContractViolation when a problem has fewer than k samples.
double pass_at_k(const std::vector<std::vector<bool>>& per_problem_outcomes, int k);

// Unbiased estimator 1 - C(n-c, k) / C(n, k) for n samples with c correct.
double pass_at_k_unbiased(int n, int c, int k);

struct ProblemRecord {
    std::string problem_id;
    bool solved = false;
    bool scoring_failed = false;
    int iterations = 0;
    bool terminated_early = false;
    bool partial = false;
    double final_rate = 0.0;
    long long tokens = 0;
    bool tokens_approx = false;
    int backend_calls = 0;
    std::optional<std::string> error;
};

struct EvalReport {
    std::string dataset_id;
    std::vector<ProblemRecord> problems;
    int solved = 0;
    double pass_at_1 = 0.0;
    std::optional<double> pass_at_k;
    int k = 0;
    long long total_response_tokens = 0;
    bool tokens_approx = false;
    // Problems that ran iteration i (budget curve).
    std::vector<int> exploration_requests_per_iteration;
    std::vector<int> backend_calls_per_iteration;
    bool mbpp_signature_hint = false;
};

struct BenchOptions {
    bool compute_pass_at_k = false;
};

struct BenchRun {
    EvalReport report;
    std::vector<SolveResult> results;       // dataset order
    std::map<std::string, std::string> traces;  // problem id -> trace JSON-lines
    std::map<std::string, long long> wall_ms;
};

BenchRun run_benchmark(const std::vector<Problem>& dataset, const std::string& dataset_id, const Config& cfg,
                       SolveContext& ctx, const BenchOptions& options = {});

OrderedJson to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

// Writes report.json, report.txt, traces/<id>.jsonl and timings.json under dir.
void write_bench_run(const BenchRun& run, const std::string& dir);

// Trace line appended after the steps, carrying the ground-truth verdict.
OrderedJson result_trace_line(const ProblemRecord& record);

}  // namespace coderefine
