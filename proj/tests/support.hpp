#pragma once

#include "coderefine/backends.hpp"
#include "coderefine/core.hpp"
#include "coderefine/execution.hpp"
#include "coderefine/fingerprint.hpp"
#include "coderefine/util.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using namespace coderefine;

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (;;) {
            path_ = base / ("coderefine-test-" + std::to_string(rd()));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string python_block(const std::string& body) {
    std::string out = "```python\n" + body;
    if (!body.ends_with('\n')) out += '\n';
    return out + "```\n";
}

// A well-formed response: program fence followed by a test fence.
inline std::string program_with_tests(const std::string& program, const std::vector<std::string>& tests) {
    std::string t;
    for (const auto& line : tests) t += line + "\n";
    return "Here is my solution.\n\n" + python_block(program) + "\nTests:\n\n" + python_block(t);
}

// Programs and tests carry marker tokens so stub rules can match them.
inline std::string program_marked(const std::string& marker) {
    return "def f(x):\n    return \"" + marker + "\"\n";
}
inline std::string test_marked(const std::string& marker) {
    return "assert f(0) == \"" + marker + "\"";
}

inline Problem make_problem(const std::string& id, const std::string& description = "Write a function f(x).",
                            std::vector<std::string> gt = {}) {
    Problem p;
    p.id = id;
    p.description = description;
    p.ground_truth_tests = std::move(gt);
    return p;
}

inline ScriptedMockBackend::Record record(std::optional<std::string> problem_id, std::optional<int> iteration,
                                          std::optional<int> sample_index, std::string response,
                                          std::optional<long long> tokens = 10) {
    ScriptedMockBackend::Record r;
    r.problem_id = std::move(problem_id);
    r.iteration = iteration;
    r.sample_index = sample_index;
    r.response = std::move(response);
    r.completion_tokens = tokens;
    return r;
}

inline BackendDescriptor mock_descriptor(int request_parallelism = 4, int retry_budget = 1) {
    BackendDescriptor d;
    d.backend_id = "mock";
    d.kind = BackendKind::scripted_mock;
    d.scenario_path = "(in-memory)";
    d.request_parallelism = request_parallelism;
    d.retry_budget = retry_budget;
    return d;
}

inline TableExecutor::Rule pass_rule(const std::string& solution, const std::string& test) {
    return {solution, test, RawOutcome{TestStatus::pass, std::nullopt, std::nullopt, Millis{0}}};
}

inline TableExecutor::Rule fail_rule(const std::string& solution, const std::string& test,
                                     const std::string& error_class = "AssertionError",
                                     TestStatus status = TestStatus::fail) {
    return {solution, test, RawOutcome{status, error_class, "failed: " + test, Millis{0}}};
}

inline TestCase make_test(const std::string& source, Normalizer& normalizer,
                          TestCategory category = TestCategory::regular) {
    TestCase t;
    t.source = source;
    t.category = category;
    t.fingerprint = canonical_fingerprint(source, normalizer);
    return t;
}

}  // namespace testsupport
