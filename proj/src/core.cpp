#include "coderefine/core.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace coderefine {

namespace {

std::string trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto s = trim(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw ConfigError(key + " must be an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto s = trim(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw ConfigError(key + " must be a non-negative integer, got '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    const auto s = trim(v);
    std::size_t used = 0;
    double out = 0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + " must be a number, got '" + v + "'");
    }
    if (used != s.size()) throw ConfigError(key + " must be a number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    auto s = trim(v);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key + " must be a boolean, got '" + v + "'");
}

int at_least(const std::string& key, long long v, long long lo) {
    if (v < lo) throw ConfigError(key + " must be ≥ " + std::to_string(lo));
    if (v > 1'000'000'000) throw ConfigError(key + " is out of range");
    return static_cast<int>(v);
}

void apply_preset(Config& cfg, const std::string& name) {
    if (name == "default") {
        cfg.t = 0.5;
        cfg.k = 5;
        cfg.n = 5;
        cfg.m = 3;
        cfg.theta = 0.8;
    } else if (name == "sota") {
        cfg.k = 20;
        cfg.t = 1.0;
        cfg.n = 2;
        cfg.theta = 1.0;
        cfg.m = 3;
    } else {
        throw ConfigError("preset must be one of {default, sota}, got '" + name + "'");
    }
    cfg.preset = name;
}

std::string format_real(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "preset", "k", "n", "m", "t", "theta",
        "per_test_timeout", "suite_timeout", "executor_parallelism", "rng_seed",
        "max_output_bytes", "problem_timeout", "problem_concurrency",
        "score_on_merged_pool", "include_sample_io", "mbpp_signature_hint",
    };
    return keys;
}

Config validate_config(const RawConfig& raw) {
    const auto& keys = config_keys();
    for (const auto& [key, _] : raw) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ConfigError("unknown config key '" + key + "'");
    }

    Config cfg;
    if (auto it = raw.find("preset"); it != raw.end()) apply_preset(cfg, trim(it->second));

    auto get = [&](const char* key) -> const std::string* {
        auto it = raw.find(key);
        return it == raw.end() ? nullptr : &it->second;
    };

    if (auto* v = get("k")) cfg.k = at_least("k", parse_int("k", *v), 1);
    if (auto* v = get("n")) cfg.n = at_least("n", parse_int("n", *v), 1);
    if (auto* v = get("m")) cfg.m = at_least("m", parse_int("m", *v), 1);
    if (auto* v = get("t")) {
        cfg.t = parse_real("t", *v);
        if (!(cfg.t >= 0.0 && cfg.t <= 2.0)) throw ConfigError("t must be in [0, 2]");
    }
    if (auto* v = get("theta")) {
        cfg.theta = parse_real("theta", *v);
        if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) throw ConfigError("theta must be in [0, 1]");
    }
    if (auto* v = get("per_test_timeout"))
        cfg.per_test_timeout = Millis{at_least("per_test_timeout", parse_int("per_test_timeout", *v), 1)};
    if (auto* v = get("suite_timeout"))
        cfg.suite_timeout = Millis{at_least("suite_timeout", parse_int("suite_timeout", *v), 1)};
    if (auto* v = get("executor_parallelism"))
        cfg.executor_parallelism = at_least("executor_parallelism", parse_int("executor_parallelism", *v), 1);
    if (auto* v = get("rng_seed")) cfg.rng_seed = parse_uint("rng_seed", *v);
    if (auto* v = get("max_output_bytes"))
        cfg.max_output_bytes =
            static_cast<std::size_t>(at_least("max_output_bytes", parse_int("max_output_bytes", *v), 1));
    if (auto* v = get("problem_timeout"))
        cfg.problem_timeout = Millis{at_least("problem_timeout", parse_int("problem_timeout", *v), 0)};
    if (auto* v = get("problem_concurrency"))
        cfg.problem_concurrency = at_least("problem_concurrency", parse_int("problem_concurrency", *v), 1);
    if (auto* v = get("score_on_merged_pool")) cfg.score_on_merged_pool = parse_bool("score_on_merged_pool", *v);
    if (auto* v = get("include_sample_io")) cfg.include_sample_io = parse_bool("include_sample_io", *v);
    if (auto* v = get("mbpp_signature_hint")) cfg.mbpp_signature_hint = parse_bool("mbpp_signature_hint", *v);

    if (cfg.per_test_timeout > cfg.suite_timeout)
        throw ConfigError("per_test_timeout must be ≤ suite_timeout");
    return cfg;
}

RawConfig parse_config_text(const std::string& text) {
    RawConfig out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto sep = body.find('=');
        if (sep == std::string::npos) sep = body.find(':');
        if (sep == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        auto key = trim(std::string_view(body).substr(0, sep));
        auto value = trim(std::string_view(body).substr(sep + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

RawConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

RawConfig to_raw(const Config& cfg) {
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    return {
        {"preset", cfg.preset},
        {"k", std::to_string(cfg.k)},
        {"n", std::to_string(cfg.n)},
        {"m", std::to_string(cfg.m)},
        {"t", format_real(cfg.t)},
        {"theta", format_real(cfg.theta)},
        {"per_test_timeout", std::to_string(cfg.per_test_timeout.count())},
        {"suite_timeout", std::to_string(cfg.suite_timeout.count())},
        {"executor_parallelism", std::to_string(cfg.executor_parallelism)},
        {"rng_seed", std::to_string(cfg.rng_seed)},
        {"max_output_bytes", std::to_string(cfg.max_output_bytes)},
        {"problem_timeout", std::to_string(cfg.problem_timeout.count())},
        {"problem_concurrency", std::to_string(cfg.problem_concurrency)},
        {"score_on_merged_pool", b(cfg.score_on_merged_pool)},
        {"include_sample_io", b(cfg.include_sample_io)},
        {"mbpp_signature_hint", b(cfg.mbpp_signature_hint)},
    };
}

std::string CandidateSolution::id() const {
    return "i" + std::to_string(iteration) + ".s" + std::to_string(sample_index);
}

std::string to_string(TestCategory c) {
    switch (c) {
        case TestCategory::regular: return "regular";
        case TestCategory::boundary: return "boundary";
        case TestCategory::performance: return "performance";
        case TestCategory::ground_truth: return "ground_truth";
    }
    return "regular";
}

TestCategory category_from_string(const std::string& s) {
    if (s == "regular") return TestCategory::regular;
    if (s == "boundary") return TestCategory::boundary;
    if (s == "performance") return TestCategory::performance;
    if (s == "ground_truth") return TestCategory::ground_truth;
    throw std::invalid_argument("unknown test category '" + s + "'");
}

std::string to_string(TestStatus s) {
    switch (s) {
        case TestStatus::pass: return "pass";
        case TestStatus::fail: return "fail";
        case TestStatus::error: return "error";
        case TestStatus::timeout: return "timeout";
        case TestStatus::crash: return "crash";
    }
    return "crash";
}

TestStatus status_from_string(const std::string& s) {
    if (s == "pass") return TestStatus::pass;
    if (s == "fail") return TestStatus::fail;
    if (s == "error") return TestStatus::error;
    if (s == "timeout") return TestStatus::timeout;
    if (s == "crash") return TestStatus::crash;
    throw std::invalid_argument("unknown test status '" + s + "'");
}

std::string to_string(TrajectoryKind k) {
    return k == TrajectoryKind::temperature ? "temperature" : "reflection";
}

ExecutionReport ExecutionReport::from_outcomes(std::string solution_ref, std::vector<TestOutcome> outcomes) {
    ExecutionReport r;
    r.solution_ref = std::move(solution_ref);
    r.outcomes = std::move(outcomes);
    r.total = static_cast<int>(r.outcomes.size());
    r.pass_count = static_cast<int>(
        std::count_if(r.outcomes.begin(), r.outcomes.end(), [](const TestOutcome& o) { return o.status == TestStatus::pass; }));
    return r;
}

const TestOutcome* ExecutionReport::find(const std::string& fingerprint) const {
    for (const auto& o : outcomes)
        if (o.test_fingerprint == fingerprint) return &o;
    return nullptr;
}

}  // namespace coderefine
