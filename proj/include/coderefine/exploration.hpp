#pragma once

#include "coderefine/core.hpp"
#include "coderefine/jsonl.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coderefine {

// ---------------------------------------------------------------------------
// Generation backends
// ---------------------------------------------------------------------------

struct GenerationRequest {
    std::string problem_id;
    int iteration = 0;
    int sample_index = 0;
    int attempt = 0;
    double temperature = 0.0;
    std::string prompt;
    std::string tag = "solve";  // solve | collect-temperature | collect-reflection
};

struct GenerationResponse {
    std::string text;
    std::optional<long long> completion_tokens;
};

// The backend could not produce a response at all (network, auth, missing
// scenario entry). Fatal for the current iteration.
struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class BackendKind { http_chat, scripted_mock };

struct BackendDescriptor {
    std::string backend_id = "mock";
    BackendKind kind = BackendKind::scripted_mock;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "CODEREFINE_API_KEY";
    std::string scenario_path;
    int request_parallelism = 4;
    int retry_budget = 1;

    void validate() const;
    // Never contains credentials; only the name of the key's variable.
    OrderedJson to_json() const;
    static BackendDescriptor from_json(const Json& j);
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual const BackendDescriptor& descriptor() const = 0;
    // Must be safe to call concurrently.
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Prompt templates and instructions
// ---------------------------------------------------------------------------

inline constexpr std::string_view kInitialTemplate = "gen_v1";
inline constexpr std::string_view kRefinementTemplate = "refine_v1";

// Templates are plain text with {problem}, {best_solution}, {failed_test},
// {feedback}, {tests}, {m} and {sample_io} placeholders.
class TemplateRegistry {
public:
    TemplateRegistry();  // registers the built-in templates

    void add(std::string id, std::string text);
    // Registers every "<id>.txt" file in `dir`, overriding built-ins.
    void load_directory(const std::string& dir);

    bool contains(const std::string& id) const { return templates_.contains(id); }
    const std::string& get(const std::string& id) const;
    const std::map<std::string, std::string>& all() const { return templates_; }

private:
    std::map<std::string, std::string> templates_;
};

Instruction build_initial_instruction(const Problem& problem, const TemplateRegistry& templates,
                                      const std::string& template_id = std::string(kInitialTemplate));

// Every reflection input must be present; throws ContractViolation otherwise.
Instruction build_refinement_instruction(const Problem& problem, const std::optional<CandidateSolution>& best,
                                         const std::optional<TestCase>& failed_test,
                                         const std::optional<std::string>& feedback,
                                         const std::vector<TestCase>& sampled_tests, const TemplateRegistry& templates,
                                         const std::string& template_id = std::string(kRefinementTemplate));

struct RenderOptions {
    int m = 3;
    std::vector<std::string> sample_io;  // only filled when include_sample_io is on
};

// Placeholders are substituted in a single pass; substituted text is never
// re-expanded.
std::string render_instruction(const Instruction& instruction, const TemplateRegistry& templates,
                               const RenderOptions& options);

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParsedTest {
    std::string source;
    TestCategory category = TestCategory::regular;

    bool operator==(const ParsedTest&) const = default;
};

struct ParsedResponse {
    std::string program;
    std::vector<ParsedTest> tests;
};

// First fenced block is the program. A second fenced block holds the tests,
// split per top-level statement with setup lines folded into the following
// assert. Without one, top-level asserts are lifted out
// of the program block, and assert lines in the surrounding prose are picked
// up as well. "# boundary"-style comments set the category of following tests.
ParsedResponse parse_response(std::string_view raw);

// Splits Python-like source into top-level statements. Comments are dropped
// except as category markers.
std::vector<ParsedTest> split_top_level_statements(std::string_view source,
                                                   TestCategory initial = TestCategory::regular);

// ---------------------------------------------------------------------------
// Exploration
// ---------------------------------------------------------------------------

struct ExplorationResult {
    std::vector<CandidateSolution> solutions;
    std::vector<TestCase> tests;  // before dedup, fingerprints empty
    long long raw_token_count = 0;
    bool tokens_approx = false;
    int dropped = 0;
    int backend_calls = 0;
    std::vector<std::string> events;
};

struct ExploreOptions {
    int iteration = 0;
    std::vector<std::string> sample_io;
    std::string tag = "solve";
};

// Counts used when the backend reports no usage: ceil(bytes / 4).
long long approximate_tokens(std::string_view text);

// k independent generations at cfg.t, merged in sample order. Malformed
// samples are retried up to the backend's retry budget and then dropped.
// BackendError propagates.
ExplorationResult explore(const Instruction& instruction, const Config& cfg, Backend& backend,
                          const TemplateRegistry& templates, const ExploreOptions& options = {});

}  // namespace coderefine
