#pragma once

#include "coderefine/core.hpp"
#include "coderefine/jsonl.hpp"
#include "coderefine/testing_pool.hpp"
#include "coderefine/util.hpp"

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace coderefine {

// One loop-body execution, as written to the per-problem trace.
struct IterationRecord {
    int iteration = 0;
    std::string instruction_kind = "initial";  // "initial" | "reflection"
    std::optional<std::string> target_error_type;
    std::optional<std::string> failed_test_fingerprint;
    int sampled_tests = 0;
    int solutions = 0;
    int dropped = 0;
    int tests_generated = 0;
    int tests_unique = 0;
    int suite_size = 0;
    std::vector<double> local_rates;
    double local_best_rate = 0.0;
    std::optional<int> local_best_index;
    bool merged = false;
    int tests_added = 0;
    double global_best_rate = 0.0;
    long long tokens = 0;
    bool tokens_approx = false;
    int backend_calls = 0;
    bool barren = false;
    bool early_stop = false;

    bool operator==(const IterationRecord&) const = default;
};

OrderedJson to_json(const IterationRecord& r);
IterationRecord iteration_record_from_json(const Json& j);

struct RefinementState {
    std::optional<CandidateSolution> global_best;
    double global_best_rate = 0.0;
    TestingPool pool;
    std::set<std::string> seen_error_types;
    std::vector<IterationRecord> iteration_ledger;
    Instruction instruction;
    Rng rng;

    // Highest raw pass rate seen anywhere; only used when no global best exists.
    std::optional<CandidateSolution> best_seen;
    double best_seen_rate = -1.0;
};

// Improving merge: when local_rate > global_best_rate, adopts local_best as
// the global best and adds candidate_pool to the pool.
bool merge_if_improving(RefinementState& state, std::span<const TestCase> candidate_pool, double local_rate,
                        const std::optional<CandidateSolution>& local_best);

}  // namespace coderefine
