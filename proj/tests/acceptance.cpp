// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include "coderefine/bench.hpp"
#include "coderefine/cli.hpp"
#include "coderefine/trajectory.hpp"

#include "properties.hpp"
#include "scenarios.hpp"
#include "support.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

using namespace coderefine;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool ok = false;
    std::string detail;
};

Verdict trace_equivalence() {
    const auto started = std::chrono::steady_clock::now();
    const auto all = scenarios::all();
    for (const auto& s : all) {
        const auto r = scenarios::run(s).result;
        const auto diff = scenarios::mismatch(s, r);
        if (!diff.empty()) return {false, s.name + ": " + diff};
        if (ledger_from_trace(trace_jsonl(r)) != r.ledger) return {false, s.name + ": trace does not round-trip"};
    }
    const auto ms = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started).count();
    if (ms >= 1000) return {false, "took " + std::to_string(ms) + " ms"};
    return {true, std::to_string(all.size()) + " hand-worked scenarios matched in " + std::to_string(ms) + " ms"};
}

// Twenty problems; the first ten are solved perfectly by the first
// exploration, the rest never pass anything.
struct BudgetWorld {
    std::vector<Problem> problems;
    std::vector<ScriptedMockBackend::Record> records;
    std::vector<TableExecutor::Rule> rules;
};

BudgetWorld budget_world() {
    BudgetWorld w;
    for (int i = 0; i < 20; ++i) {
        const auto id = "task" + std::to_string(i);
        const auto prog = (i < 10 ? "EASY" : "HARD") + std::to_string(i);
        w.problems.push_back(make_problem(id, "Task " + std::to_string(i) + ".", {"assert hidden_" + id + "()"}));
        w.records.push_back(record(id, std::nullopt, std::nullopt, scenarios::respond(prog, {"T" + std::to_string(i)})));
    }
    w.rules.push_back(pass_rule("EASY", "*"));
    return w;
}

BenchRun run_budget(const BudgetWorld& w, double theta, std::vector<GenerationRequest>* requests = nullptr) {
    ScriptedMockBackend backend(mock_descriptor(), w.records);
    TableExecutor executor(w.rules);
    LexicalNormalizer normalizer;
    TemplateRegistry templates;
    SolveContext ctx{backend, executor, normalizer, templates};
    auto cfg = validate_config({{"k", "2"}, {"n", "5"}});
    cfg.theta = theta;
    auto run = run_benchmark(w.problems, "budget", cfg, ctx);
    if (requests) *requests = backend.requests();
    return run;
}

Verdict early_stop_budget() {
    const auto w = budget_world();
    const auto stop = run_budget(w, 0.8).report.exploration_requests_per_iteration;
    const auto full = run_budget(w, 1.0).report.exploration_requests_per_iteration;
    const std::vector<int> want_stop = {20, 10, 10, 10, 10};
    const std::vector<int> want_full = {20, 20, 20, 20, 20};
    auto show = [](const std::vector<int>& v) {
        std::string s;
        for (auto x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
        return "[" + s + "]";
    };
    if (stop != want_stop || full != want_full)
        return {false, "active per iteration theta=0.8 " + show(stop) + ", theta=1.0 " + show(full)};
    return {true, "active tasks per iteration " + show(stop) + " vs " + show(full) + " without early stop"};
}

Verdict pool_invariants() {
    constexpr int kCases = 1000;
    const int v = properties::pool_uniqueness_and_idempotence(kCases, 101) +
                  properties::sample_passing_subset(kCases, 202) + properties::error_target_membership(kCases, 303) +
                  properties::merge_iff_strict_improvement(kCases, 404);
    if (v != 0) return {false, std::to_string(v) + " violations"};
    return {true, "4 properties x " + std::to_string(kCases) + " generated cases"};
}

ExecutionReport report_from(const std::vector<bool>& passes, int copies) {
    std::vector<TestOutcome> outcomes;
    for (int c = 0; c < copies; ++c)
        for (std::size_t i = 0; i < passes.size(); ++i) {
            TestOutcome o;
            o.test_fingerprint = "lex:" + std::to_string(c) + "-" + std::to_string(i);
            o.status = passes[i] ? TestStatus::pass : TestStatus::fail;
            if (!passes[i]) o.error_type = "assertion-failure";
            outcomes.push_back(std::move(o));
        }
    return ExecutionReport::from_outcomes("s", std::move(outcomes));
}

Verdict selection() {
    Rng rng(9);
    int violations = 0;
    constexpr int kCases = 1000;
    for (int c = 0; c < kCases; ++c) {
        const auto sols = 1 + uniform_below(rng, 6);
        const auto tests = 1 + uniform_below(rng, 6);
        std::vector<std::vector<bool>> grid(sols);
        for (auto& row : grid)
            for (std::uint64_t t = 0; t < tests; ++t) row.push_back(uniform_below(rng, 2) == 0);
        std::size_t oracle = 0;
        std::size_t best = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto count = static_cast<std::size_t>(std::count(grid[i].begin(), grid[i].end(), true));
            if (i == 0 || count > best) {
                best = count;
                oracle = i;
            }
        }
        for (int copies : {1, 3}) {
            std::vector<ExecutionReport> reports;
            for (const auto& row : grid) reports.push_back(report_from(row, copies));
            if (select_best(reports) != oracle) ++violations;
        }
    }
    if (violations != 0) return {false, std::to_string(violations) + " argmax disagreements"};
    return {true, std::to_string(kCases) + " random rate vectors, lowest-index ties, stable under test duplication"};
}

double subset_pass_at_k(int n, int c, int k) {
    long long total = 0;
    long long hit = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != k) continue;
        ++total;
        if (mask & ((1u << c) - 1)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

Verdict pass_at_k_oracle() {
    Rng rng(17);
    int violations = 0;
    constexpr int kCases = 200;
    for (int c = 0; c < kCases; ++c) {
        const auto problems = 1 + uniform_below(rng, 10);
        std::vector<std::vector<bool>> outcomes(problems);
        for (auto& o : outcomes)
            for (int j = 0; j < 5; ++j) o.push_back(uniform_below(rng, 3) == 0);
        for (int k : {1, 2, 5}) {
            std::size_t hits = 0;
            for (const auto& o : outcomes) hits += std::any_of(o.begin(), o.begin() + k, [](bool b) { return b; });
            if (pass_at_k(outcomes, k) != static_cast<double>(hits) / static_cast<double>(problems)) ++violations;
            const int n = 5;
            const int correct = static_cast<int>(uniform_below(rng, n + 1));
            if (std::abs(pass_at_k_unbiased(n, correct, k) - subset_pass_at_k(n, correct, k)) > 1e-12) ++violations;
        }
    }
    if (violations != 0) return {false, std::to_string(violations) + " disagreements with brute force"};
    return {true, std::to_string(kCases) + " cases x k in {1,2,5}, first-k and unbiased estimators"};
}

Verdict trajectory_filter() {
    Rng rng(31);
    int violations = 0;
    int kept = 0;
    const char* kinds[] = {"GOOD", "HALF", "ZERO"};
    const std::vector<std::string> gt = {"assert gt_one() == 1", "assert gt_two() == 2"};
    for (int c = 0; c < 100; ++c) {
        std::vector<Problem> problems;
        std::vector<ScriptedMockBackend::Record> records;
        for (int p = 0; p < 2; ++p) {
            const auto id = "p" + std::to_string(p);
            problems.push_back(make_problem(id, "Return the marker.", gt));
            for (int ti = 0; ti < 2; ++ti)
                for (int j = 0; j < 3; ++j) {
                    auto r = record(id, ti, j,
                                    scenarios::respond(std::string(kinds[uniform_below(rng, 3)]) + "-" +
                                                           std::to_string(c) + "-" + std::to_string(ti * 3 + j),
                                                       {"T" + std::to_string(j)}));
                    r.tag = "collect-temperature";
                    records.push_back(std::move(r));
                }
            auto refl = record(id, std::nullopt, std::nullopt,
                               scenarios::respond(std::string(kinds[uniform_below(rng, 3)]) + "-r" + std::to_string(c), {}));
            refl.tag = "collect-reflection";
            records.push_back(std::move(refl));
        }
        ScriptedMockBackend backend(mock_descriptor(), records);
        TableExecutor executor({pass_rule("GOOD", "*"), pass_rule("HALF", "gt_one")});
        LexicalNormalizer normalizer;
        TemplateRegistry templates;
        CollectionContext ctx{backend, executor, normalizer, templates, ExecutorLimits{}, 3, 2};
        const auto run = run_collection(problems, ctx, 3, {0.2, 0.8}, 0.5);
        for (const auto& rec : run.records) {
            ++kept;
            if (rec.pass_rate != 1.0 || rec.output_text.find("GOOD") == std::string::npos) ++violations;
            const bool embeds = rec.input_text.find(kFeedbackDelimiter) != std::string::npos;
            if (embeds != (rec.kind == TrajectoryKind::reflection)) ++violations;
            if (embeds && (rec.input_text.find("ZERO") == std::string::npos ||
                           rec.input_text.find("HALF") != std::string::npos))
                ++violations;
        }
    }
    TempDir dir;
    try {
        export_dataset({{"p", "x", "o", 0.5, 0.5, TrajectoryKind::temperature}}, dir.file("d"), dir.file("m"), "");
        ++violations;
    } catch (const ContractViolation&) {
    }
    if (violations != 0) return {false, std::to_string(violations) + " violations"};
    return {true, std::to_string(kept) + " kept records, all verified at rate 1 with consistent kind markers"};
}

Verdict ground_truth_isolation() {
    const auto w = budget_world();
    std::vector<GenerationRequest> requests;
    run_budget(w, 0.8, &requests);
    int leaks = 0;
    for (const auto& r : requests)
        if (r.prompt.find("hidden_") != std::string::npos) ++leaks;
    if (requests.empty()) return {false, "no requests recorded"};
    if (leaks != 0) return {false, std::to_string(leaks) + " prompts contain ground-truth tests"};
    return {true, std::to_string(requests.size()) + " prompts audited, none carry ground-truth tests"};
}

Verdict deterministic_bench() {
    TempDir dir;
    std::string dataset;
    std::string scenario;
    for (int i = 0; i < 6; ++i) {
        const auto id = "t" + std::to_string(i);
        dataset += Json{{"task_id", id}, {"text", "Task."}, {"test_list", {"assert gt_" + id + "()"}}}.dump() + "\n";
        scenario += Json{{"problem_id", id},
                         {"sample_index", 0},
                         {"response", scenarios::respond("GOOD" + std::to_string(i % 2), {"T1", "T2"})}}
                        .dump() +
                    "\n";
        scenario += Json{{"problem_id", id},
                         {"response", scenarios::respond("MEH" + std::to_string(i), {"T" + std::to_string(i)})}}
                        .dump() +
                    "\n";
    }
    write_file(dir.file("data.jsonl"), dataset);
    write_file(dir.file("scenario.jsonl"), scenario);
    write_file(dir.file("outcomes.jsonl"), R"({"solution": "GOOD1", "test": "*", "status": "pass"})" "\n"
                                           R"({"solution": "GOOD0", "test": "T1", "status": "pass"})" "\n");
    auto args = [&](const std::string& out, const std::string& workers) {
        return std::vector<std::string>{"coderefine", "bench", dir.file("data.jsonl"), "--scenario",
                                        dir.file("scenario.jsonl"), "--outcomes", dir.file("outcomes.jsonl"),
                                        "--k", "3", "--n", "3", "--seed", "5", "--pass-at-k",
                                        "--problem-concurrency", workers, "--request-parallelism", workers,
                                        "--out", out};
    };
    std::ostringstream sink;
    if (cli::run(args(dir.file("a"), "1"), sink, sink) != 0) return {false, "first run failed: " + sink.str()};
    if (cli::run(args(dir.file("b"), "8"), sink, sink) != 0) return {false, "second run failed: " + sink.str()};
    int compared = 0;
    std::vector<std::string> files = {"report.json", "report.txt"};
    for (const auto& e : fs::directory_iterator(dir.file("a") + "/traces"))
        files.push_back("traces/" + e.path().filename().string());
    for (const auto& f : files) {
        const auto a = dir.file("a") + "/" + f;
        const auto b = dir.file("b") + "/" + f;
        if (!fs::exists(b) || read_file(a) != read_file(b)) return {false, f + " differs"};
        ++compared;
    }
    return {true, std::to_string(compared) + " files byte-identical across runs with 1 and 8 workers"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"trace equivalence on scripted scenarios", trace_equivalence},
        {"early-stop budget", early_stop_budget},
        {"testing-pool invariants", pool_invariants},
        {"solution selection", selection},
        {"pass@k against brute force", pass_at_k_oracle},
        {"trajectory filter", trajectory_filter},
        {"ground-truth isolation", ground_truth_isolation},
        {"deterministic bench output", deterministic_bench},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        std::cout << (v.ok ? "PASS " : "FAIL ") << name << ": " << v.detail << "\n";
        failed += v.ok ? 0 : 1;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
