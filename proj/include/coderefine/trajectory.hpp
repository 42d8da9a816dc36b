#pragma once

#include "coderefine/core.hpp"
#include "coderefine/execution.hpp"
#include "coderefine/exploration.hpp"
#include "coderefine/fingerprint.hpp"
#include "coderefine/jsonl.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace coderefine {

// Separates the original prompt from the appended feedback in reflection
// inputs. Present in input_text iff the record is reflection-based.
inline constexpr std::string_view kFeedbackDelimiter = "\n\n### Feedback on a previous attempt\n";

struct CollectionCounters {
    int generated = 0;      // backend samples requested
    int parse_failed = 0;
    int verified = 0;       // samples scored on ground truth
    int kept_temperature = 0;
    int kept_reflection = 0;
    int duplicates = 0;
    int skipped_no_ground_truth = 0;
    int skipped_no_feedback = 0;
    int ineligible = 0;     // failures with 0 < pass_rate < 1

    CollectionCounters& operator+=(const CollectionCounters& o);
};

// A failed sample eligible for reflection-based generation.
struct ReflectionCandidate {
    Problem problem;
    std::string input_text;  // x
    std::string failed_output;
    std::string feedback;
    double pass_rate = 0.0;
};

struct CollectionContext {
    Backend& backend;
    Executor& executor;
    Normalizer& normalizer;
    const TemplateRegistry& templates;
    ExecutorLimits limits;
    int m = 3;
    int problem_concurrency = 4;
};

std::string reflection_input(std::string_view input, std::string_view failed_output, std::string_view feedback);

// k samples per (problem, temperature) scored on ground truth; perfect ones
// become temperature records. When `failures` is given, every sample with
// pass_rate 0 that yields feedback from the generated tests is appended.
std::vector<TrajectoryRecord> collect_temperature(const std::vector<Problem>& problems, CollectionContext& ctx, int k,
                                                  const std::vector<double>& temperatures, CollectionCounters& counters,
                                                  std::vector<ReflectionCandidate>* failures = nullptr);

// Corrections generated from x' = (x, feedback); perfect ones become
// reflection records. Candidates whose pass_rate is not exactly 0 are skipped.
std::vector<TrajectoryRecord> collect_reflection(const std::vector<ReflectionCandidate>& failures,
                                                 CollectionContext& ctx, int k, double temperature,
                                                 CollectionCounters& counters);

struct CollectionRun {
    std::string source_dataset;
    int k = 0;
    std::vector<double> temperature_grid;
    std::vector<TrajectoryRecord> records;
    CollectionCounters counters;
};

inline const std::vector<double>& default_temperature_grid() {
    static const std::vector<double> grid = {0.2, 0.5, 0.8, 1.0};
    return grid;
}

// Temperature pass over the grid, then a reflection pass at `reflection_t`.
// Records are deduplicated per problem by exact output text and ordered by
// (problem_id, kind, generation order).
CollectionRun run_collection(const std::vector<Problem>& problems, CollectionContext& ctx, int k,
                             const std::vector<double>& temperatures, double reflection_t,
                             std::string source_dataset = {});

// Throws if any id appears in both splits.
void assert_disjoint_splits(const std::vector<Problem>& train, const std::vector<Problem>& eval);

// Canonical export order used by export_dataset.
std::vector<TrajectoryRecord> ordered_for_export(std::vector<TrajectoryRecord> records);

std::string dataset_jsonl(const std::vector<TrajectoryRecord>& records);

// Writes the JSON-lines dataset to dataset_path and the manifest to
// manifest_path; returns the manifest. Throws ContractViolation if any
// record has pass_rate < 1 and std::runtime_error on I/O failure.
OrderedJson export_dataset(const std::vector<TrajectoryRecord>& records, const std::string& dataset_path,
                           const std::string& manifest_path, const std::string& source_dataset_hash);

}  // namespace coderefine
