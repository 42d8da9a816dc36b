#include "coderefine/exploration.hpp"

#include "coderefine/util.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <utility>

namespace coderefine {

namespace {

const char* const kDefaultInitial =
    R"(You are an expert Python programmer. Write a Python solution for the problem below.

### Problem
{problem}
{sample_io}
### Response format
1. Put the complete solution in one ```python code block.
2. Put exactly {m} test cases in a second ```python code block, one assert statement per test case.
   Cover regular tests, boundary tests, and performance tests, and start each group with a
   comment line: # regular, # boundary, # performance.
)";

const char* const kDefaultRefinement =
    R"(You are an expert Python programmer. Improve the current best solution to the problem below.

### Problem
{problem}
{sample_io}
### Current best solution
```python
{best_solution}
```

### Failed test
```python
{failed_test}
```

### Feedback
{feedback}

### Tests the current solution already passes
{tests}

### Response format
1. Put the corrected, complete solution in one ```python code block. Fix the failure above
   without breaking the tests that already pass.
2. Put exactly {m} new test cases in a second ```python code block, one assert statement per
   test case. Cover regular tests, boundary tests, and performance tests, and start each group
   with a comment line: # regular, # boundary, # performance.
)";

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) nl = text.size();
        std::string line(text.substr(start, nl - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        if (nl == text.size()) break;
        start = nl + 1;
    }
    return lines;
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t begin, std::size_t end) {
    std::string out;
    for (auto i = begin; i < end; ++i) {
        if (i > begin) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

std::string strip_trailing_blank(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.erase(s.begin());
    return s;
}

std::optional<TestCategory> category_marker(std::string_view comment) {
    std::string lower;
    for (char c : comment) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower.find("boundary") != std::string::npos || lower.find("edge") != std::string::npos)
        return TestCategory::boundary;
    if (lower.find("performance") != std::string::npos || lower.find("stress") != std::string::npos)
        return TestCategory::performance;
    if (lower.find("regular") != std::string::npos || lower.find("basic") != std::string::npos)
        return TestCategory::regular;
    return std::nullopt;
}

// Tracks bracket depth and open triple-quoted strings across physical lines.
struct LineScanner {
    int depth = 0;
    std::optional<std::string> open_triple;
    bool backslash = false;

    bool continuing() const { return depth > 0 || open_triple.has_value() || backslash; }

    void feed(std::string_view line) {
        backslash = false;
        std::size_t i = 0;
        while (i < line.size()) {
            if (open_triple) {
                auto close = line.find(*open_triple, i);
                if (close == std::string_view::npos) return;
                i = close + 3;
                open_triple.reset();
                continue;
            }
            const char c = line[i];
            if (c == '#') return;
            if (c == '"' || c == '\'') {
                if (line.substr(i, 3) == std::string(3, c)) {
                    open_triple = std::string(3, c);
                    i += 3;
                    continue;
                }
                ++i;
                while (i < line.size() && line[i] != c) i += line[i] == '\\' ? 2 : 1;
                ++i;
                continue;
            }
            if (c == '(' || c == '[' || c == '{') ++depth;
            if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
            ++i;
        }
        auto t = line.find_last_not_of(" \t");
        backslash = t != std::string_view::npos && line[t] == '\\';
    }
};

struct Statement {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive, trailing blank lines excluded
    TestCategory category = TestCategory::regular;
};

std::vector<Statement> statement_ranges(const std::vector<std::string>& lines, TestCategory initial) {
    std::vector<Statement> out;
    std::optional<Statement> current;
    TestCategory category = initial;
    LineScanner scan;
    bool decorator_pending = false;

    auto finish = [&] {
        if (current) out.push_back(*current);
        current.reset();
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        const auto body = trim(line);
        if (current && scan.continuing()) {
            scan.feed(line);
            current->end = i + 1;
            continue;
        }
        if (body.empty()) continue;
        const bool indented = std::isspace(static_cast<unsigned char>(line.front()));
        if (body.front() == '#') {
            if (!indented) {
                if (auto marker = category_marker(body)) {
                    finish();
                    category = *marker;
                }
            }
            continue;
        }
        if (indented && current) {
            scan.feed(line);
            current->end = i + 1;
            continue;
        }
        if (!decorator_pending) {
            finish();
            current = Statement{i, i + 1, category};
        } else {
            current->end = i + 1;
        }
        scan.feed(line);
        decorator_pending = body.front() == '@';
    }
    finish();
    return out;
}

struct Fence {
    std::size_t begin;  // first content line
    std::size_t end;    // exclusive
};

std::vector<Fence> find_fences(const std::vector<std::string>& lines, std::vector<bool>& in_fence) {
    std::vector<Fence> fences;
    in_fence.assign(lines.size(), false);
    constexpr auto kClosed = std::string::npos;
    std::size_t open = kClosed;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto body = trim(lines[i]);
        if (body.rfind("```", 0) == 0) {
            in_fence[i] = true;
            if (open != kClosed) {
                fences.push_back({open, i});
                open = kClosed;
            } else {
                open = i + 1;
            }
            continue;
        }
        if (open != kClosed) in_fence[i] = true;
    }
    if (open != kClosed) fences.push_back({open, lines.size()});
    return fences;
}

bool is_assert(std::string_view statement) {
    return statement.rfind("assert ", 0) == 0 || statement.rfind("assert(", 0) == 0;
}

// Non-assert statements are glued onto the next assert as its setup; imports
// are repeated in front of every later test.
std::vector<ParsedTest> attach_setup(std::vector<ParsedTest> statements) {
    std::vector<ParsedTest> out;
    std::string imports;
    std::string setup;
    auto append = [](std::string& to, const std::string& line) { to += to.empty() ? line : "\n" + line; };
    for (auto& st : statements) {
        if (st.source.rfind("import ", 0) == 0 || st.source.rfind("from ", 0) == 0) {
            append(imports, st.source);
            continue;
        }
        if (!is_assert(st.source)) {
            append(setup, st.source);
            continue;
        }
        std::string prefix = imports;
        if (!setup.empty()) append(prefix, std::exchange(setup, {}));
        if (!prefix.empty()) st.source = prefix + "\n" + st.source;
        out.push_back(std::move(st));
    }
    if (!setup.empty()) out.push_back({imports.empty() ? setup : imports + "\n" + setup, statements.back().category});
    return out;
}

// "- `assert f(1) == 2`" -> "assert f(1) == 2"
std::optional<std::string> prose_assert(std::string_view line) {
    auto s = trim(line);
    std::size_t i = 0;
    while (i < s.size() && (s[i] == '-' || s[i] == '*' || std::isdigit(static_cast<unsigned char>(s[i])) ||
                            s[i] == '.' || s[i] == ')' || s[i] == ' '))
        ++i;
    s = s.substr(i);
    if (!s.empty() && s.front() == '`') {
        s.erase(s.begin());
        if (auto tick = s.find('`'); tick != std::string::npos) s = s.substr(0, tick);
    }
    s = trim(s);
    if (!is_assert(s)) return std::nullopt;
    return s;
}

std::string render_tests_block(const std::vector<std::string>& tests) {
    if (tests.empty()) return "(none yet)";
    std::string out = "```python\n";
    for (const auto& t : tests) out += t + "\n";
    out += "```";
    return out;
}

std::string render_sample_io(const std::vector<std::string>& sample_io) {
    if (sample_io.empty()) return "";
    std::string out = "\n### Example tests\n```python\n";
    for (const auto& t : sample_io) out += t + "\n";
    out += "```\n";
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void BackendDescriptor::validate() const {
    if (backend_id.empty()) throw ContractViolation("backend_id must not be empty");
    if (kind == BackendKind::scripted_mock && scenario_path.empty())
        throw ContractViolation("scripted-mock backend requires a scenario file");
    if (kind == BackendKind::http_chat && endpoint.empty()) throw ContractViolation("http-chat backend requires an endpoint");
    if (request_parallelism < 1) throw ContractViolation("request_parallelism must be at least 1");
    if (retry_budget < 0) throw ContractViolation("retry_budget must not be negative");
}

OrderedJson BackendDescriptor::to_json() const {
    OrderedJson j;
    j["backend_id"] = backend_id;
    j["kind"] = kind == BackendKind::http_chat ? "http-chat" : "scripted-mock";
    if (!endpoint.empty()) j["endpoint"] = endpoint;
    if (!model.empty()) j["model"] = model;
    if (kind == BackendKind::http_chat) j["api_key_env"] = api_key_env;
    if (!scenario_path.empty()) j["scenario_path"] = scenario_path;
    j["request_parallelism"] = request_parallelism;
    j["retry_budget"] = retry_budget;
    return j;
}

BackendDescriptor BackendDescriptor::from_json(const Json& j) {
    BackendDescriptor d;
    d.backend_id = j.value("backend_id", d.backend_id);
    const auto kind = j.value("kind", std::string("scripted-mock"));
    if (kind == "http-chat") {
        d.kind = BackendKind::http_chat;
    } else if (kind == "scripted-mock") {
        d.kind = BackendKind::scripted_mock;
    } else {
        throw std::invalid_argument("unknown backend kind '" + kind + "'");
    }
    d.endpoint = j.value("endpoint", std::string());
    d.model = j.value("model", std::string());
    d.api_key_env = j.value("api_key_env", d.api_key_env);
    d.scenario_path = j.value("scenario_path", std::string());
    d.request_parallelism = j.value("request_parallelism", d.request_parallelism);
    d.retry_budget = j.value("retry_budget", d.retry_budget);
    return d;
}

// ---------------------------------------------------------------------------

TemplateRegistry::TemplateRegistry() {
    templates_.emplace(kInitialTemplate, kDefaultInitial);
    templates_.emplace(kRefinementTemplate, kDefaultRefinement);
}

void TemplateRegistry::add(std::string id, std::string text) { templates_[std::move(id)] = std::move(text); }

void TemplateRegistry::load_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("template directory '" + dir + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) add(f.stem().string(), read_file(f.string()));
}

const std::string& TemplateRegistry::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw ContractViolation("unknown template '" + id + "'");
    return it->second;
}

Instruction build_initial_instruction(const Problem& problem, const TemplateRegistry& templates,
                                      const std::string& template_id) {
    if (trim(problem.description).empty()) throw ContractViolation("empty problem");
    if (!templates.contains(template_id)) throw ContractViolation("unknown template '" + template_id + "'");
    Instruction i;
    i.problem_id = problem.id;
    i.problem = problem.description;
    i.template_id = template_id;
    return i;
}

Instruction build_refinement_instruction(const Problem& problem, const std::optional<CandidateSolution>& best,
                                         const std::optional<TestCase>& failed_test,
                                         const std::optional<std::string>& feedback,
                                         const std::vector<TestCase>& sampled_tests, const TemplateRegistry& templates,
                                         const std::string& template_id) {
    if (!best) throw ContractViolation("refinement instruction requires the best solution");
    if (!failed_test) throw ContractViolation("refinement instruction requires a failed test");
    if (!feedback) throw ContractViolation("refinement instruction requires feedback");
    auto i = build_initial_instruction(problem, templates, template_id);
    i.best_solution = best->source;
    i.failed_test = failed_test->source;
    i.feedback = *feedback;
    for (const auto& t : sampled_tests) i.sampled_tests.push_back(t.source);
    return i;
}

std::string render_instruction(const Instruction& instruction, const TemplateRegistry& templates,
                               const RenderOptions& options) {
    const auto& tpl = templates.get(instruction.template_id);
    const std::map<std::string, std::string, std::less<>> values = {
        {"problem", instruction.problem},
        {"best_solution", instruction.best_solution.value_or("")},
        {"failed_test", instruction.failed_test.value_or("")},
        {"feedback", instruction.feedback.value_or("")},
        {"tests", render_tests_block(instruction.sampled_tests)},
        {"m", std::to_string(options.m)},
        {"sample_io", render_sample_io(options.sample_io)},
    };
    std::string out;
    out.reserve(tpl.size() + instruction.problem.size() * 2);
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '{') {
            const auto close = tpl.find('}', i + 1);
            if (close != std::string::npos) {
                const std::string_view name(tpl.data() + i + 1, close - i - 1);
                if (auto it = values.find(name); it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(tpl[i++]);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<ParsedTest> split_top_level_statements(std::string_view source, TestCategory initial) {
    const auto lines = split_lines(source);
    std::vector<ParsedTest> out;
    for (const auto& st : statement_ranges(lines, initial)) {
        auto text = strip_trailing_blank(join_lines(lines, st.begin, st.end));
        if (!text.empty()) out.push_back({std::move(text), st.category});
    }
    return out;
}

ParsedResponse parse_response(std::string_view raw) {
    const auto lines = split_lines(raw);
    std::vector<bool> in_fence;
    const auto fences = find_fences(lines, in_fence);
    if (fences.empty()) throw ParseError("no code block found");

    ParsedResponse r;
    const auto& first = fences.front();
    if (fences.size() >= 2) {
        r.program = strip_trailing_blank(join_lines(lines, first.begin, first.end));
        const auto& second = fences[1];
        const std::vector<std::string> test_lines(lines.begin() + static_cast<long>(second.begin),
                                                  lines.begin() + static_cast<long>(second.end));
        r.tests = attach_setup(split_top_level_statements(join_lines(test_lines, 0, test_lines.size())));
    } else {
        const std::vector<std::string> block(lines.begin() + static_cast<long>(first.begin),
                                             lines.begin() + static_cast<long>(first.end));
        std::vector<bool> keep(block.size(), true);
        for (const auto& st : statement_ranges(block, TestCategory::regular)) {
            const auto text = strip_trailing_blank(join_lines(block, st.begin, st.end));
            if (!is_assert(text)) continue;
            r.tests.push_back({text, st.category});
            for (auto i = st.begin; i < st.end; ++i) keep[i] = false;
        }
        std::vector<std::string> program_lines;
        for (std::size_t i = 0; i < block.size(); ++i)
            if (keep[i]) program_lines.push_back(block[i]);
        r.program = strip_trailing_blank(join_lines(program_lines, 0, program_lines.size()));

        TestCategory prose_category = TestCategory::regular;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (in_fence[i]) continue;
            if (auto a = prose_assert(lines[i])) {
                r.tests.push_back({*a, prose_category});
            } else if (auto marker = category_marker(lines[i])) {
                prose_category = *marker;
            }
        }
    }
    if (trim(r.program).empty()) throw ParseError("code block is empty");
    return r;
}

// ---------------------------------------------------------------------------

long long approximate_tokens(std::string_view text) {
    return static_cast<long long>((text.size() + 3) / 4);
}

ExplorationResult explore(const Instruction& instruction, const Config& cfg, Backend& backend,
                          const TemplateRegistry& templates, const ExploreOptions& options) {
    const auto& desc = backend.descriptor();
    const auto prompt = render_instruction(instruction, templates, RenderOptions{cfg.m, options.sample_io});

    struct Sample {
        std::optional<ParsedResponse> parsed;
        long long tokens = 0;
        bool approx = false;
        int calls = 0;
        std::vector<std::string> events;
    };
    std::vector<Sample> samples(static_cast<std::size_t>(cfg.k));

    parallel_for(samples.size(), static_cast<std::size_t>(desc.request_parallelism), [&](std::size_t j) {
        auto& s = samples[j];
        for (int attempt = 0; attempt <= desc.retry_budget; ++attempt) {
            GenerationRequest req;
            req.problem_id = instruction.problem_id;
            req.iteration = options.iteration;
            req.sample_index = static_cast<int>(j);
            req.attempt = attempt;
            req.temperature = cfg.t;
            req.prompt = prompt;
            req.tag = options.tag;
            auto resp = backend.generate(req);
            ++s.calls;
            if (resp.completion_tokens) {
                s.tokens += *resp.completion_tokens;
            } else {
                s.tokens += approximate_tokens(resp.text);
                s.approx = true;
            }
            try {
                s.parsed = parse_response(resp.text);
                return;
            } catch (const ParseError& e) {
                s.events.push_back("sample " + std::to_string(j) + " attempt " + std::to_string(attempt) +
                                   " malformed: " + e.what());
            }
        }
        s.events.push_back("sample " + std::to_string(j) + " dropped");
    });

    ExplorationResult result;
    for (std::size_t j = 0; j < samples.size(); ++j) {
        auto& s = samples[j];
        result.raw_token_count += s.tokens;
        result.tokens_approx = result.tokens_approx || s.approx;
        result.backend_calls += s.calls;
        result.events.insert(result.events.end(), s.events.begin(), s.events.end());
        if (!s.parsed) {
            ++result.dropped;
            continue;
        }
        CandidateSolution sol;
        sol.source = std::move(s.parsed->program);
        sol.iteration = options.iteration;
        sol.sample_index = static_cast<int>(j);
        sol.backend_id = desc.backend_id;
        result.solutions.push_back(std::move(sol));
        const auto take = std::min<std::size_t>(s.parsed->tests.size(), static_cast<std::size_t>(cfg.m));
        for (std::size_t t = 0; t < take; ++t) {
            TestCase tc;
            tc.source = std::move(s.parsed->tests[t].source);
            tc.category = s.parsed->tests[t].category;
            tc.origin_iteration = options.iteration;
            tc.sample_index = static_cast<int>(j);
            result.tests.push_back(std::move(tc));
        }
    }
    return result;
}

}  // namespace coderefine
