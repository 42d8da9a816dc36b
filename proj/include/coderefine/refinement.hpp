#pragma once

#include "coderefine/core.hpp"
#include "coderefine/execution.hpp"
#include "coderefine/exploration.hpp"
#include "coderefine/fingerprint.hpp"
#include "coderefine/state.hpp"

#include <optional>
#include <string>
#include <vector>

namespace coderefine {

// Collaborators for one solve. All of them must tolerate concurrent use when
// problems are solved in parallel.
struct SolveContext {
    Backend& backend;
    Executor& executor;
    Normalizer& normalizer;
    const TemplateRegistry& templates;
};

struct SolveResult {
    std::optional<CandidateSolution> final_solution;
    double final_rate = 0.0;
    int iterations_used = 0;
    bool terminated_early = false;
    bool partial = false;
    bool final_is_fallback = false;  // no improving merge ever fired
    std::optional<std::string> error;
    std::vector<IterationRecord> ledger;
    std::vector<CandidateSolution> first_exploration;
    long long tokens = 0;
    bool tokens_approx = false;
    int backend_calls = 0;
};

RefinementState init_state(const Problem& problem, const Config& cfg, const TemplateRegistry& templates);

// One loop body: pick reflection targets, explore, dedup, score every
// candidate, merge on strict improvement. Appends to state.iteration_ledger
// and returns the new record. BackendError propagates with state.pool and the
// global best untouched.
IterationRecord step(RefinementState& state, const Problem& problem, int iteration, const Config& cfg,
                     SolveContext& ctx, std::vector<CandidateSolution>* explored = nullptr);

SolveResult solve(const Problem& problem, const Config& cfg, SolveContext& ctx);

// Per-problem trace: one {"type":"step", ...} line per ledger entry.
std::string trace_jsonl(const SolveResult& result);
std::vector<IterationRecord> ledger_from_trace(const std::string& jsonl);

// Sample I/O shown to the backend when include_sample_io is on.
std::vector<std::string> sample_io_for(const Problem& problem, const Config& cfg);

}  // namespace coderefine
