#include "coderefine/bench.hpp"

#include "coderefine/util.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>

namespace coderefine {

DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "mbpp-jsonl") return DatasetFormat::mbpp_jsonl;
    if (s == "humaneval-jsonl") return DatasetFormat::humaneval_jsonl;
    throw std::invalid_argument("unknown dataset format '" + s + "' (expected mbpp-jsonl or humaneval-jsonl)");
}

std::string to_string(DatasetFormat f) { return f == DatasetFormat::mbpp_jsonl ? "mbpp-jsonl" : "humaneval-jsonl"; }

namespace {

std::string id_string(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw std::runtime_error("task_id must be a string or integer");
}

const Json& require(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) throw std::runtime_error(std::string("missing field '") + key + "'");
    return j.at(key);
}

Problem mbpp_problem(const Json& j, const LoadOptions& options) {
    Problem p;
    p.id = id_string(require(j, "task_id"));
    p.description = require(j, "text").get<std::string>();
    const auto& tests = require(j, "test_list");
    if (!tests.is_array()) throw std::runtime_error("'test_list' must be an array");
    for (const auto& t : tests) p.ground_truth_tests.push_back(t.get<std::string>());
    if (p.ground_truth_tests.empty()) throw std::runtime_error("'test_list' is empty");
    if (j.contains("code") && j["code"].is_string()) p.ground_truth_solution = j["code"].get<std::string>();
    if (options.mbpp_signature_hint)
        p.description += "\nYour code should pass this test:\n" + p.ground_truth_tests.front();
    return p;
}

Problem humaneval_problem(const Json& j) {
    Problem p;
    p.id = id_string(require(j, "task_id"));
    p.description = require(j, "prompt").get<std::string>();
    p.entry_point = require(j, "entry_point").get<std::string>();
    const auto test = require(j, "test").get<std::string>();
    p.ground_truth_tests.push_back(test + "\n\ncheck(" + *p.entry_point + ")\n");
    if (j.contains("canonical_solution") && j["canonical_solution"].is_string())
        p.ground_truth_solution = p.description + j["canonical_solution"].get<std::string>();
    return p;
}

}  // namespace

std::vector<Problem> load_dataset_text(const std::string& text, DatasetFormat format, const LoadOptions& options) {
    std::vector<Problem> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = Json::parse(line);
            auto p = format == DatasetFormat::mbpp_jsonl ? mbpp_problem(j, options) : humaneval_problem(j);
            if (!ids.insert(p.id).second) throw std::runtime_error("duplicate task_id '" + p.id + "'");
            out.push_back(std::move(p));
        } catch (const std::exception& e) {
            throw std::runtime_error("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Problem> load_dataset(const std::string& path, DatasetFormat format, const LoadOptions& options) {
    return load_dataset_text(read_file(path), format, options);
}

std::vector<TestCase> ground_truth_cases(const Problem& problem) {
    LexicalNormalizer lexical;
    std::vector<TestCase> out;
    for (const auto& src : problem.ground_truth_tests) {
        TestCase t;
        t.source = src;
        t.category = TestCategory::ground_truth;
        t.fingerprint = canonical_fingerprint(src, lexical);
        t.origin_iteration = -1;
        out.push_back(std::move(t));
    }
    return out;
}

ScoreOutcome score_final(const Problem& problem, const std::optional<CandidateSolution>& solution, Executor& executor,
                         const ExecutorLimits& limits) {
    ScoreOutcome s;
    s.total = static_cast<int>(problem.ground_truth_tests.size());
    if (!solution || trim(solution->source).empty()) return s;
    if (problem.ground_truth_tests.empty()) {
        s.executor_failed = true;
        return s;
    }
    try {
        const auto report = executor.run_suite(*solution, ground_truth_cases(problem), limits);
        s.passed = report.pass_count;
        s.solved = report.pass_count == report.total;
        s.executor_failed = std::any_of(report.outcomes.begin(), report.outcomes.end(),
                                        [](const TestOutcome& o) { return o.status == TestStatus::crash; });
    } catch (const std::exception&) {
        s.executor_failed = true;
        s.solved = false;
    }
    return s;
}

double pass_at_k(const std::vector<std::vector<bool>>& per_problem_outcomes, int k) {
    if (k < 1) throw ContractViolation("pass_at_k: k must be at least 1");
    if (per_problem_outcomes.empty()) throw ContractViolation("pass_at_k: no problems");
    std::size_t hits = 0;
    for (const auto& samples : per_problem_outcomes) {
        if (samples.size() < static_cast<std::size_t>(k))
            throw ContractViolation("pass_at_k: a problem has fewer than k samples");
        if (std::any_of(samples.begin(), samples.begin() + k, [](bool b) { return b; })) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(per_problem_outcomes.size());
}

double pass_at_k_unbiased(int n, int c, int k) {
    if (n < 1 || k < 1 || c < 0 || c > n || k > n) throw ContractViolation("pass_at_k_unbiased: need 0 <= c <= n, 1 <= k <= n");
    if (n - c < k) return 1.0;
    double miss = 1.0;
    for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    return 1.0 - miss;
}

OrderedJson result_trace_line(const ProblemRecord& r) {
    OrderedJson j;
    j["type"] = "result";
    j["problem_id"] = r.problem_id;
    j["solved"] = r.solved;
    j["final_rate"] = r.final_rate;
    j["iterations"] = r.iterations;
    j["terminated_early"] = r.terminated_early;
    j["partial"] = r.partial;
    return j;
}

BenchRun run_benchmark(const std::vector<Problem>& dataset, const std::string& dataset_id, const Config& cfg,
                       SolveContext& ctx, const BenchOptions& options) {
    using Clock = std::chrono::steady_clock;
    BenchRun run;
    run.results.resize(dataset.size());
    std::vector<ProblemRecord> records(dataset.size());
    std::vector<std::vector<bool>> first_samples(dataset.size());
    std::vector<long long> wall(dataset.size(), 0);
    const auto limits = ExecutorLimits::from_config(cfg);

    parallel_for(dataset.size(), static_cast<std::size_t>(cfg.problem_concurrency), [&](std::size_t i) {
        const auto& problem = dataset[i];
        const auto started = Clock::now();
        auto& rec = records[i];
        rec.problem_id = problem.id;
        SolveResult result;
        try {
            result = solve(problem, cfg, ctx);
        } catch (const std::exception& e) {
            result.partial = true;
            result.error = e.what();
        }
        const auto score = score_final(problem, result.final_solution, ctx.executor, limits);
        rec.solved = score.solved;
        rec.scoring_failed = score.executor_failed;
        rec.iterations = result.iterations_used;
        rec.terminated_early = result.terminated_early;
        rec.partial = result.partial;
        rec.final_rate = result.final_rate;
        rec.tokens = result.tokens;
        rec.tokens_approx = result.tokens_approx;
        rec.backend_calls = result.backend_calls;
        rec.error = result.error;
        if (options.compute_pass_at_k) {
            auto& samples = first_samples[i];
            for (const auto& sol : result.first_exploration)
                samples.push_back(score_final(problem, sol, ctx.executor, limits).solved);
            samples.resize(std::max<std::size_t>(samples.size(), static_cast<std::size_t>(cfg.k)), false);
        }
        run.results[i] = std::move(result);
        wall[i] = std::chrono::duration_cast<Millis>(Clock::now() - started).count();
    });

    auto& report = run.report;
    report.dataset_id = dataset_id;
    report.k = cfg.k;
    report.mbpp_signature_hint = cfg.mbpp_signature_hint;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& rec = records[i];
        const auto& res = run.results[i];
        report.solved += rec.solved ? 1 : 0;
        report.total_response_tokens += rec.tokens;
        report.tokens_approx = report.tokens_approx || rec.tokens_approx;
        for (const auto& step : res.ledger) {
            const auto it = static_cast<std::size_t>(step.iteration);
            if (report.exploration_requests_per_iteration.size() <= it) {
                report.exploration_requests_per_iteration.resize(it + 1, 0);
                report.backend_calls_per_iteration.resize(it + 1, 0);
            }
            ++report.exploration_requests_per_iteration[it];
            report.backend_calls_per_iteration[it] += step.backend_calls;
        }
        run.traces[rec.problem_id] = trace_jsonl(res) + result_trace_line(rec).dump() + "\n";
        run.wall_ms[rec.problem_id] = wall[i];
    }
    report.problems = std::move(records);
    report.pass_at_1 = dataset.empty() ? 0.0 : static_cast<double>(report.solved) / static_cast<double>(dataset.size());
    if (options.compute_pass_at_k && !dataset.empty()) report.pass_at_k = pass_at_k(first_samples, cfg.k);
    return run;
}

OrderedJson to_json(const EvalReport& report) {
    OrderedJson j;
    j["v"] = 1;
    j["dataset_id"] = report.dataset_id;
    j["problem_count"] = report.problems.size();
    j["solved"] = report.solved;
    j["pass_at_1"] = report.pass_at_1;
    j["pass_at_k"] = report.pass_at_k ? OrderedJson(*report.pass_at_k) : OrderedJson(nullptr);
    j["k"] = report.k;
    j["total_response_tokens"] = report.total_response_tokens;
    j["tokens_approx"] = report.tokens_approx;
    j["exploration_requests_per_iteration"] = report.exploration_requests_per_iteration;
    j["backend_calls_per_iteration"] = report.backend_calls_per_iteration;
    j["mbpp_signature_hint"] = report.mbpp_signature_hint;
    auto problems = OrderedJson::array();
    for (const auto& p : report.problems) {
        OrderedJson pj;
        pj["problem_id"] = p.problem_id;
        pj["solved"] = p.solved;
        pj["scoring_failed"] = p.scoring_failed;
        pj["iterations"] = p.iterations;
        pj["terminated_early"] = p.terminated_early;
        pj["partial"] = p.partial;
        pj["final_rate"] = p.final_rate;
        pj["tokens"] = p.tokens;
        pj["tokens_approx"] = p.tokens_approx;
        pj["backend_calls"] = p.backend_calls;
        pj["error"] = p.error ? OrderedJson(*p.error) : OrderedJson(nullptr);
        problems.push_back(std::move(pj));
    }
    j["problems"] = std::move(problems);
    return j;
}

std::string report_table(const EvalReport& report) {
    std::ostringstream os;
    os << "dataset: " << report.dataset_id << "\n";
    os << std::left << std::setw(24) << "problem" << std::setw(8) << "solved" << std::setw(7) << "iters"
       << std::setw(8) << "early" << std::setw(10) << "rate" << "tokens\n";
    for (const auto& p : report.problems) {
        os << std::left << std::setw(24) << p.problem_id << std::setw(8) << (p.solved ? "yes" : "no") << std::setw(7)
           << p.iterations << std::setw(8) << (p.terminated_early ? "yes" : "no") << std::setw(10)
           << std::fixed << std::setprecision(3) << p.final_rate << p.tokens << (p.partial ? "  (partial)" : "")
           << "\n";
    }
    os << std::defaultfloat;
    os << "pass@1: " << report.solved << "/" << report.problems.size() << " = " << std::fixed << std::setprecision(4)
       << report.pass_at_1 << "\n";
    if (report.pass_at_k) os << "pass@" << report.k << ": " << *report.pass_at_k << "\n";
    os << "response tokens: " << report.total_response_tokens << (report.tokens_approx ? " (approx)" : "") << "\n";
    os << "active tasks per iteration:";
    for (auto c : report.exploration_requests_per_iteration) os << " " << c;
    os << "\n";
    return os.str();
}

void write_bench_run(const BenchRun& run, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "traces");
    write_file((fs::path(dir) / "report.json").string(), to_json(run.report).dump(2) + "\n");
    write_file((fs::path(dir) / "report.txt").string(), report_table(run.report));
    for (const auto& [id, trace] : run.traces)
        write_file((fs::path(dir) / "traces" / (sanitize_filename(id) + ".jsonl")).string(), trace);
    OrderedJson timings;
    for (const auto& [id, ms] : run.wall_ms) timings[id] = ms;
    write_file((fs::path(dir) / "timings.json").string(), timings.dump(2) + "\n");
}

}  // namespace coderefine
