#include "coderefine/refinement.hpp"

#include <chrono>
#include <unordered_map>

namespace coderefine {

OrderedJson to_json(const IterationRecord& r) {
    OrderedJson j;
    j["type"] = "step";
    j["iteration"] = r.iteration;
    j["instruction"] = r.instruction_kind;
    j["target_error_type"] = r.target_error_type ? OrderedJson(*r.target_error_type) : OrderedJson(nullptr);
    j["failed_test"] = r.failed_test_fingerprint ? OrderedJson(*r.failed_test_fingerprint) : OrderedJson(nullptr);
    j["sampled_tests"] = r.sampled_tests;
    j["solutions"] = r.solutions;
    j["dropped"] = r.dropped;
    j["tests_generated"] = r.tests_generated;
    j["tests_unique"] = r.tests_unique;
    j["suite_size"] = r.suite_size;
    j["local_rates"] = r.local_rates;
    j["l_p"] = r.local_best_rate;
    j["l_s"] = r.local_best_index ? OrderedJson(*r.local_best_index) : OrderedJson(nullptr);
    j["merged"] = r.merged;
    j["tests_added"] = r.tests_added;
    j["g_p"] = r.global_best_rate;
    j["tokens"] = r.tokens;
    j["tokens_approx"] = r.tokens_approx;
    j["backend_calls"] = r.backend_calls;
    j["barren"] = r.barren;
    j["early_stop"] = r.early_stop;
    return j;
}

IterationRecord iteration_record_from_json(const Json& j) {
    IterationRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.instruction_kind = j.at("instruction").get<std::string>();
    if (!j.at("target_error_type").is_null()) r.target_error_type = j.at("target_error_type").get<std::string>();
    if (!j.at("failed_test").is_null()) r.failed_test_fingerprint = j.at("failed_test").get<std::string>();
    r.sampled_tests = j.at("sampled_tests").get<int>();
    r.solutions = j.at("solutions").get<int>();
    r.dropped = j.at("dropped").get<int>();
    r.tests_generated = j.at("tests_generated").get<int>();
    r.tests_unique = j.at("tests_unique").get<int>();
    r.suite_size = j.at("suite_size").get<int>();
    r.local_rates = j.at("local_rates").get<std::vector<double>>();
    r.local_best_rate = j.at("l_p").get<double>();
    if (!j.at("l_s").is_null()) r.local_best_index = j.at("l_s").get<int>();
    r.merged = j.at("merged").get<bool>();
    r.tests_added = j.at("tests_added").get<int>();
    r.global_best_rate = j.at("g_p").get<double>();
    r.tokens = j.at("tokens").get<long long>();
    r.tokens_approx = j.at("tokens_approx").get<bool>();
    r.backend_calls = j.at("backend_calls").get<int>();
    r.barren = j.at("barren").get<bool>();
    r.early_stop = j.at("early_stop").get<bool>();
    return r;
}

std::vector<std::string> sample_io_for(const Problem& problem, const Config& cfg) {
    if (!cfg.include_sample_io || problem.ground_truth_tests.empty()) return {};
    return {problem.ground_truth_tests.front()};
}

RefinementState init_state(const Problem& problem, const Config& cfg, const TemplateRegistry& templates) {
    RefinementState s;
    s.instruction = build_initial_instruction(problem, templates);
    s.rng = problem_rng(cfg.rng_seed, problem.id);
    return s;
}

namespace {

// Rebuilds the global best's report over the whole pool, reusing outcomes the
// local scoring already produced.
void refresh_best_report(RefinementState& state, const ExecutionReport& local_report, Executor& executor,
                         const ExecutorLimits& limits) {
    std::unordered_map<std::string, TestOutcome> known;
    for (const auto& o : local_report.outcomes) known.emplace(o.test_fingerprint, o);
    std::vector<TestCase> missing;
    for (const auto& t : state.pool.tests())
        if (!known.contains(t.fingerprint)) missing.push_back(t);
    if (!missing.empty()) {
        const auto extra = executor.run_suite(*state.global_best, missing, limits);
        for (const auto& o : extra.outcomes) known.emplace(o.test_fingerprint, o);
    }
    std::vector<TestOutcome> outcomes;
    outcomes.reserve(state.pool.size());
    for (const auto& t : state.pool.tests()) outcomes.push_back(known.at(t.fingerprint));
    state.pool.record_report(ExecutionReport::from_outcomes(state.global_best->id(), std::move(outcomes)));
}

}  // namespace

IterationRecord step(RefinementState& state, const Problem& problem, int iteration, const Config& cfg,
                     SolveContext& ctx, std::vector<CandidateSolution>* explored) {
    if (iteration >= cfg.n) throw ContractViolation("step: iteration must be below n");
    IterationRecord rec;
    rec.iteration = iteration;

    if (state.global_best) {
        const auto* best_report = state.pool.report_for(state.global_best->id());
        auto tests = sample_passing_tests(state.pool, best_report, cfg.m, state.rng);
        auto target = next_error_target(state.pool, best_report, state.seen_error_types, state.rng);
        rec.sampled_tests = static_cast<int>(tests.size());
        if (target) {
            state.instruction = build_refinement_instruction(problem, state.global_best, target->test, target->feedback,
                                                             tests, ctx.templates);
            rec.target_error_type = target->error_type;
            rec.failed_test_fingerprint = target->test.fingerprint;
        }
    }
    rec.instruction_kind = state.instruction.is_reflection() ? "reflection" : "initial";

    auto ex = explore(state.instruction, cfg, ctx.backend, ctx.templates,
                      ExploreOptions{iteration, sample_io_for(problem, cfg), "solve"});
    rec.solutions = static_cast<int>(ex.solutions.size());
    rec.dropped = ex.dropped;
    rec.tests_generated = static_cast<int>(ex.tests.size());
    rec.tokens = ex.raw_token_count;
    rec.tokens_approx = ex.tokens_approx;
    rec.backend_calls = ex.backend_calls;
    if (explored) *explored = ex.solutions;

    auto finish = [&] {
        rec.global_best_rate = state.global_best_rate;
        rec.early_stop = state.global_best_rate > cfg.theta;
        state.iteration_ledger.push_back(rec);
        return rec;
    };

    if (ex.solutions.empty()) {
        rec.barren = true;
        return finish();
    }

    auto candidate_pool = dedup_tests(std::move(ex.tests), ctx.normalizer);
    rec.tests_unique = static_cast<int>(candidate_pool.size());

    std::vector<TestCase> suite;
    if (cfg.score_on_merged_pool) {
        suite = state.pool.tests();
        for (const auto& t : candidate_pool)
            if (!state.pool.contains(t.fingerprint)) suite.push_back(t);
    } else {
        suite = candidate_pool;
    }
    rec.suite_size = static_cast<int>(suite.size());

    const auto limits = ExecutorLimits::from_config(cfg);
    std::vector<ExecutionReport> reports;
    if (!suite.empty()) {
        for (const auto& sol : ex.solutions) {
            reports.push_back(ctx.executor.run_suite(sol, suite, limits));
            rec.local_rates.push_back(pass_rate(reports.back()));
        }
    } else {
        rec.local_rates.assign(ex.solutions.size(), 0.0);
    }
    for (std::size_t i = 0; i < ex.solutions.size(); ++i) {
        if (rec.local_rates[i] > state.best_seen_rate) {
            state.best_seen = ex.solutions[i];
            state.best_seen_rate = rec.local_rates[i];
        }
    }

    std::optional<CandidateSolution> local_best;
    if (!reports.empty()) {
        const auto idx = select_best(reports);
        // A local best only exists once some candidate beats l_p = 0.
        if (rec.local_rates[idx] > 0.0) {
            rec.local_best_index = static_cast<int>(idx);
            rec.local_best_rate = rec.local_rates[idx];
            local_best = ex.solutions[idx];
        }
    }

    if (cfg.score_on_merged_pool && state.global_best && !suite.empty()) {
        const auto rescored = ctx.executor.run_suite(*state.global_best, suite, limits);
        state.global_best_rate = pass_rate(rescored);
    }

    const auto before = state.pool.size();
    rec.merged = merge_if_improving(state, candidate_pool, rec.local_best_rate, local_best);
    rec.tests_added = static_cast<int>(state.pool.size() - before);
    if (rec.merged) refresh_best_report(state, reports[static_cast<std::size_t>(*rec.local_best_index)], ctx.executor, limits);
    return finish();
}

SolveResult solve(const Problem& problem, const Config& cfg, SolveContext& ctx) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();
    auto state = init_state(problem, cfg, ctx.templates);
    SolveResult res;

    for (int it = 0; it < cfg.n; ++it) {
        if (cfg.problem_timeout.count() > 0 && Clock::now() - started >= cfg.problem_timeout) {
            res.partial = true;
            res.error = "problem wall-clock ceiling reached";
            break;
        }
        try {
            const auto rec = step(state, problem, it, cfg, ctx, it == 0 ? &res.first_exploration : nullptr);
            if (rec.early_stop) {
                res.terminated_early = true;
                break;
            }
        } catch (const BackendError& e) {
            res.partial = true;
            res.error = e.what();
            break;
        }
    }

    res.ledger = state.iteration_ledger;
    res.iterations_used = static_cast<int>(res.ledger.size());
    for (const auto& r : res.ledger) {
        res.tokens += r.tokens;
        res.tokens_approx = res.tokens_approx || r.tokens_approx;
        res.backend_calls += r.backend_calls;
    }
    if (state.global_best) {
        res.final_solution = state.global_best;
        res.final_rate = state.global_best_rate;
    } else {
        res.final_solution = state.best_seen;
        res.final_rate = 0.0;
        res.final_is_fallback = state.best_seen.has_value();
    }
    return res;
}

std::string trace_jsonl(const SolveResult& result) {
    std::vector<OrderedJson> rows;
    for (const auto& r : result.ledger) rows.push_back(to_json(r));
    return to_jsonl(rows);
}

std::vector<IterationRecord> ledger_from_trace(const std::string& jsonl) {
    std::vector<IterationRecord> out;
    for (const auto& j : parse_jsonl(jsonl, "trace"))
        if (j.value("type", std::string()) == "step") out.push_back(iteration_record_from_json(j));
    return out;
}

}  // namespace coderefine
