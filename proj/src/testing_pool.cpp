#include "coderefine/testing_pool.hpp"

#include "coderefine/jsonl.hpp"
#include "coderefine/state.hpp"

namespace coderefine {

std::size_t TestingPool::add_tests(std::span<const TestCase> new_tests) {
    std::size_t added = 0;
    for (const auto& t : new_tests) {
        if (t.fingerprint.empty()) throw ContractViolation("add_tests: test without fingerprint");
        if (index_.insert(t.fingerprint).second) {
            tests_.push_back(t);
            ++added;
        }
    }
    return added;
}

void TestingPool::record_report(const ExecutionReport& report) { last_report_by_solution_[report.solution_ref] = report; }

const ExecutionReport* TestingPool::report_for(const std::string& solution_ref) const {
    auto it = last_report_by_solution_.find(solution_ref);
    return it == last_report_by_solution_.end() ? nullptr : &it->second;
}

std::string TestingPool::snapshot_jsonl() const {
    std::vector<OrderedJson> rows;
    rows.reserve(tests_.size());
    for (const auto& t : tests_) {
        OrderedJson j;
        j["source"] = t.source;
        j["category"] = to_string(t.category);
        j["fingerprint"] = t.fingerprint;
        j["origin_iteration"] = t.origin_iteration;
        rows.push_back(std::move(j));
    }
    return to_jsonl(rows);
}

std::vector<TestCase> dedup_tests(std::vector<TestCase> tests, Normalizer& normalizer) {
    std::vector<TestCase> out;
    std::unordered_set<std::string> seen;
    for (auto& t : tests) {
        if (t.fingerprint.empty()) t.fingerprint = canonical_fingerprint(t.source, normalizer);
        if (seen.insert(t.fingerprint).second) out.push_back(std::move(t));
    }
    return out;
}

std::vector<TestCase> sample_passing_tests(const TestingPool& pool, const ExecutionReport* best_report, int m,
                                           Rng& rng) {
    if (!best_report || m <= 0) return {};
    std::vector<const TestCase*> passing;
    for (const auto& t : pool.tests()) {
        const auto* o = best_report->find(t.fingerprint);
        if (o && o->status == TestStatus::pass) passing.push_back(&t);
    }
    std::vector<TestCase> out;
    for (auto i : sample_indices(rng, passing.size(), static_cast<std::size_t>(m))) out.push_back(*passing[i]);
    return out;
}

std::string format_feedback(const TestOutcome& outcome) {
    std::string f = "Error type: " + outcome.error_type.value_or("unknown");
    if (outcome.message && !outcome.message->empty()) f += "\n" + *outcome.message;
    return f;
}

std::optional<ErrorTarget> next_error_target(const TestingPool& pool, const ExecutionReport* best_report,
                                             std::set<std::string>& seen, Rng& rng) {
    if (!best_report) return std::nullopt;
    std::map<std::string, std::vector<std::pair<const TestCase*, const TestOutcome*>>> failing;
    for (const auto& t : pool.tests()) {
        const auto* o = best_report->find(t.fingerprint);
        if (o && o->status != TestStatus::pass) failing[o->error_type.value_or("unknown")].emplace_back(&t, o);
    }
    if (failing.empty()) return std::nullopt;

    for (int attempt = 0; attempt < 2; ++attempt) {
        std::vector<const std::string*> unseen;
        for (const auto& [type, _] : failing)
            if (!seen.contains(type)) unseen.push_back(&type);
        if (unseen.empty()) {
            seen.clear();
            continue;
        }
        const auto& type = *unseen[uniform_below(rng, unseen.size())];
        const auto& group = failing.at(type);
        const auto& [test, outcome] = group[uniform_below(rng, group.size())];
        seen.insert(type);
        return ErrorTarget{*test, type, format_feedback(*outcome)};
    }
    return std::nullopt;
}

bool merge_if_improving(RefinementState& state, std::span<const TestCase> candidate_pool, double local_rate,
                        const std::optional<CandidateSolution>& local_best) {
    if (!local_best || !(local_rate > state.global_best_rate)) return false;
    state.global_best = local_best;
    state.global_best_rate = local_rate;
    state.pool.add_tests(candidate_pool);
    return true;
}

}  // namespace coderefine
