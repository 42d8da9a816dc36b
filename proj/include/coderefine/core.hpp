#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace coderefine {

using Millis = std::chrono::milliseconds;

// A benchmark task. Ground-truth fields are evaluation-only and never reach
// the generation backend.
struct Problem {
    std::string id;
    std::string description;
    std::optional<std::string> entry_point;
    std::vector<std::string> ground_truth_tests;
    std::optional<std::string> ground_truth_solution;
};

struct Config {
    int k = 5;
    int n = 5;
    int m = 3;
    double t = 0.5;
    double theta = 0.8;
    Millis per_test_timeout{2000};
    Millis suite_timeout{60000};
    int executor_parallelism = 4;
    std::uint64_t rng_seed = 0;

    // Engine knobs beyond the loop hyperparameters.
    std::size_t max_output_bytes = 4096;
    Millis problem_timeout{0};  // 0 = no ceiling
    int problem_concurrency = 4;
    bool score_on_merged_pool = false;
    bool include_sample_io = false;
    bool mbpp_signature_hint = false;
    std::string preset = "default";

    bool operator==(const Config&) const = default;
};

// A caller broke an operation's precondition.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using RawConfig = std::map<std::string, std::string>;

// Fills defaults, applies the named preset underneath explicit keys and checks
// every bound. Throws ConfigError naming the offending key.
Config validate_config(const RawConfig& raw);

// Flat "key = value" document; '#' starts a comment line.
RawConfig parse_config_text(const std::string& text);
RawConfig load_config_file(const std::string& path);

// Inverse of validate_config, for manifests.
RawConfig to_raw(const Config& cfg);

const std::vector<std::string>& config_keys();

struct CandidateSolution {
    std::string source;
    int iteration = 0;
    int sample_index = 0;
    std::string backend_id;

    std::string id() const;
    bool operator==(const CandidateSolution&) const = default;
};

enum class TestCategory { regular, boundary, performance, ground_truth };

std::string to_string(TestCategory c);
TestCategory category_from_string(const std::string& s);

struct TestCase {
    std::string source;
    TestCategory category = TestCategory::regular;
    std::string fingerprint;
    int origin_iteration = 0;
    int sample_index = 0;

    bool operator==(const TestCase&) const = default;
};

enum class TestStatus { pass, fail, error, timeout, crash };

std::string to_string(TestStatus s);
TestStatus status_from_string(const std::string& s);

struct TestOutcome {
    std::string test_fingerprint;
    TestStatus status = TestStatus::pass;
    std::optional<std::string> error_type;
    std::optional<std::string> message;
    Millis duration{0};

    bool operator==(const TestOutcome&) const = default;
};

struct ExecutionReport {
    std::string solution_ref;
    std::vector<TestOutcome> outcomes;
    int pass_count = 0;
    int total = 0;

    static ExecutionReport from_outcomes(std::string solution_ref, std::vector<TestOutcome> outcomes);
    const TestOutcome* find(const std::string& fingerprint) const;
};

struct Instruction {
    std::string problem_id;
    std::string problem;
    std::optional<std::string> best_solution;
    std::optional<std::string> failed_test;
    std::optional<std::string> feedback;
    std::vector<std::string> sampled_tests;
    std::string template_id;

    bool is_reflection() const { return best_solution.has_value(); }
    bool operator==(const Instruction&) const = default;
};

enum class TrajectoryKind { temperature, reflection };

std::string to_string(TrajectoryKind k);

struct TrajectoryRecord {
    std::string problem_id;
    std::string input_text;
    std::string output_text;
    double temperature = 0.0;
    double pass_rate = 0.0;
    TrajectoryKind kind = TrajectoryKind::temperature;

    bool operator==(const TrajectoryRecord&) const = default;
};

}  // namespace coderefine
