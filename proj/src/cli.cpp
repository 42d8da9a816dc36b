#include "coderefine/cli.hpp"

#include "coderefine/backends.hpp"
#include "coderefine/bench.hpp"
#include "coderefine/refinement.hpp"
#include "coderefine/sandbox.hpp"
#include "coderefine/trajectory.hpp"
#include "coderefine/util.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>

namespace coderefine::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    return words;
}

void copy_into(const std::string& from, const fs::path& to) {
    fs::create_directories(to.parent_path());
    std::error_code ec;
    if (fs::exists(to) && fs::equivalent(from, to, ec)) return;
    fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

// Inputs as seen from inside the run directory.
struct StagedInputs {
    RunSpec spec;  // paths rewritten to the staged copies
};

StagedInputs stage_inputs(const RunSpec& spec, const fs::path& dir) {
    StagedInputs staged{spec};
    auto& s = staged.spec;
    const fs::path inputs = dir / "inputs";
    fs::create_directories(inputs);
    auto stage = [&](std::string& path, const std::string& name) {
        if (path.empty()) return;
        copy_into(path, inputs / name);
        path = (inputs / name).string();
    };
    stage(s.dataset_path, "dataset.jsonl");
    stage(s.eval_dataset_path, "eval_dataset.jsonl");
    stage(s.outcomes_path, "outcomes.jsonl");
    if (s.backend.kind == BackendKind::scripted_mock) stage(s.backend.scenario_path, "scenario.jsonl");
    if (!s.templates_dir.empty()) {
        const fs::path tdir = inputs / "templates";
        fs::create_directories(tdir);
        for (const auto& entry : fs::directory_iterator(s.templates_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".txt")
                copy_into(entry.path().string(), tdir / entry.path().filename());
        s.templates_dir = tdir.string();
    }
    return staged;
}

OrderedJson manifest_json(const RunSpec& spec, const Config& cfg, const std::string& dataset_hash) {
    OrderedJson m;
    m["v"] = 1;
    m["command"] = spec.command;
    m["engine_version"] = std::string(kEngineVersion);
    m["started_at"] = utc_now();
    OrderedJson config = OrderedJson::object();
    for (const auto& [k, v] : to_raw(cfg)) config[k] = v;
    m["config"] = std::move(config);
    m["seed"] = cfg.rng_seed;
    auto backend = spec.backend.to_json();
    if (spec.backend.kind == BackendKind::scripted_mock) backend["scenario_path"] = "inputs/scenario.jsonl";
    m["backend"] = std::move(backend);
    m["executor"] = {{"kind", spec.executor},
                     {"outcomes", spec.outcomes_path.empty() ? OrderedJson(nullptr) : OrderedJson("inputs/outcomes.jsonl")}};
    m["harness"] = spec.harness;
    m["normalizer"] = spec.normalizer;
    m["templates"] = spec.templates_dir.empty() ? OrderedJson(nullptr) : OrderedJson("inputs/templates");
    m["dataset"] = {{"path", "inputs/dataset.jsonl"},
                    {"format", spec.dataset_format},
                    {"id", spec.dataset_id},
                    {"sha256", dataset_hash}};
    OrderedJson options;
    options["pass_at_k"] = spec.pass_at_k;
    options["temperatures"] = spec.temperatures;
    options["reflection_t"] = spec.reflection_t ? OrderedJson(*spec.reflection_t) : OrderedJson(nullptr);
    options["eval_dataset"] =
        spec.eval_dataset_path.empty() ? OrderedJson(nullptr) : OrderedJson("inputs/eval_dataset.jsonl");
    m["options"] = std::move(options);
    return m;
}

struct Engine {
    std::unique_ptr<Backend> backend;
    std::unique_ptr<Executor> executor;
    std::unique_ptr<Normalizer> normalizer;
    TemplateRegistry templates;
};

Engine build_engine(const RunSpec& spec) {
    Engine e;
    if (!spec.templates_dir.empty()) e.templates.load_directory(spec.templates_dir);
    if (spec.executor == "stub") {
        e.executor = std::make_unique<TableExecutor>(spec.outcomes_path.empty() ? TableExecutor()
                                                                                : TableExecutor::from_jsonl(spec.outcomes_path));
    } else if (spec.executor == "sandbox") {
        if (spec.harness.empty()) throw ConfigError("--executor sandbox requires --harness");
        e.executor = std::make_unique<SandboxExecutor>(spec.harness);
    } else {
        throw ConfigError("executor must be one of {stub, sandbox}, got '" + spec.executor + "'");
    }
    if (spec.normalizer == "lexical") {
        e.normalizer = std::make_unique<LexicalNormalizer>();
    } else if (spec.normalizer == "sandbox") {
        if (spec.harness.empty()) throw ConfigError("--normalizer sandbox requires --harness");
        e.normalizer = std::make_unique<SandboxNormalizer>(spec.harness);
    } else {
        throw ConfigError("normalizer must be one of {lexical, sandbox}, got '" + spec.normalizer + "'");
    }
    try {
        e.backend = make_backend(spec.backend);
    } catch (const ContractViolation& ex) {
        throw ConfigError(ex.what());
    }
    return e;
}

int exit_for(const std::vector<SolveResult>& results) {
    bool partial = false;
    bool all_failed = !results.empty();
    for (const auto& r : results) {
        partial = partial || r.partial;
        all_failed = all_failed && r.partial && r.iterations_used == 0;
    }
    if (all_failed) return kBackendFailure;
    return partial ? kPartial : kOk;
}

int run_solve(const Config& cfg, const std::vector<Problem>& problems, Engine& e,
              const fs::path& dir, std::ostream& out, std::ostream& err) {
    const auto& problem = problems.front();
    SolveContext ctx{*e.backend, *e.executor, *e.normalizer, e.templates};
    const auto result = solve(problem, cfg, ctx);

    OrderedJson report;
    report["v"] = 1;
    report["problem_id"] = problem.id;
    report["final_rate"] = result.final_rate;
    report["iterations_used"] = result.iterations_used;
    report["terminated_early"] = result.terminated_early;
    report["partial"] = result.partial;
    report["final_is_fallback"] = result.final_is_fallback;
    report["error"] = result.error ? OrderedJson(*result.error) : OrderedJson(nullptr);
    report["tokens"] = result.tokens;
    report["tokens_approx"] = result.tokens_approx;
    report["backend_calls"] = result.backend_calls;
    report["final_solution"] = result.final_solution ? OrderedJson(result.final_solution->source) : OrderedJson(nullptr);
    if (!problem.ground_truth_tests.empty()) {
        const auto score = score_final(problem, result.final_solution, *e.executor, ExecutorLimits::from_config(cfg));
        report["ground_truth"] = {{"passed", score.passed}, {"total", score.total}, {"solved", score.solved}};
    }
    fs::create_directories(dir / "traces");
    write_file((dir / "traces" / (sanitize_filename(problem.id) + ".jsonl")).string(), trace_jsonl(result));
    write_file((dir / "report.json").string(), report.dump(2) + "\n");

    if (result.final_solution) {
        out << result.final_solution->source;
        if (!result.final_solution->source.ends_with('\n')) out << '\n';
    } else {
        out << "(no solution)\n";
    }
    out << "pass rate: " << result.final_rate << " after " << result.iterations_used << " iteration(s)";
    if (result.final_is_fallback) out << " (fallback: no candidate ever improved)";
    out << '\n';
    if (result.error) err << "error: " << *result.error << '\n';
    return exit_for({result});
}

int run_bench(const RunSpec& spec, const Config& cfg, const std::vector<Problem>& problems, Engine& e,
              const fs::path& dir, std::ostream& out) {
    SolveContext ctx{*e.backend, *e.executor, *e.normalizer, e.templates};
    const auto run = run_benchmark(problems, spec.dataset_id, cfg, ctx, BenchOptions{spec.pass_at_k});
    write_bench_run(run, dir.string());
    out << report_table(run.report);
    return exit_for(run.results);
}

int run_collect(const RunSpec& spec, const Config& cfg, const std::vector<Problem>& problems, Engine& e,
                const fs::path& dir, const std::string& dataset_hash, std::ostream& out, std::ostream& err) {
    if (!spec.eval_dataset_path.empty()) {
        const auto eval = load_dataset(spec.eval_dataset_path, dataset_format_from_string(spec.dataset_format));
        assert_disjoint_splits(problems, eval);
    }
    CollectionContext ctx{*e.backend, *e.executor, *e.normalizer, e.templates, ExecutorLimits::from_config(cfg),
                          cfg.m, cfg.problem_concurrency};
    const auto temps = spec.temperatures.empty() ? default_temperature_grid() : spec.temperatures;
    const auto run = run_collection(problems, ctx, cfg.k, temps, spec.reflection_t.value_or(cfg.t), spec.dataset_id);
    if (run.counters.skipped_no_ground_truth > 0)
        err << "warning: " << run.counters.skipped_no_ground_truth
            << " problem(s) have no ground-truth tests and were skipped\n";

    const auto manifest = export_dataset(run.records, (dir / "dataset.jsonl").string(),
                                         (dir / "dataset_manifest.json").string(), dataset_hash);
    fs::create_directories(dir / "traces");
    std::map<std::string, std::vector<OrderedJson>> per_problem;
    for (const auto& p : problems) per_problem[p.id];
    for (const auto& r : run.records)
        per_problem[r.problem_id].push_back(OrderedJson{{"type", "record"},
                                                        {"kind", to_string(r.kind)},
                                                        {"temperature", r.temperature},
                                                        {"output_sha256", sha256_hex(r.output_text)}});
    for (const auto& [id, rows] : per_problem)
        write_file((dir / "traces" / (sanitize_filename(id) + ".jsonl")).string(), to_jsonl(rows));

    const auto& c = run.counters;
    OrderedJson report;
    report["v"] = 1;
    report["source_dataset"] = spec.dataset_id;
    report["k"] = run.k;
    report["temperature_grid"] = run.temperature_grid;
    report["counters"] = {{"generated", c.generated},
                          {"parse_failed", c.parse_failed},
                          {"verified", c.verified},
                          {"kept_temperature", c.kept_temperature},
                          {"kept_reflection", c.kept_reflection},
                          {"duplicates", c.duplicates},
                          {"skipped_no_ground_truth", c.skipped_no_ground_truth},
                          {"skipped_no_feedback", c.skipped_no_feedback},
                          {"ineligible", c.ineligible}};
    report["dataset_sha256"] = manifest["dataset_sha256"];
    write_file((dir / "report.json").string(), report.dump(2) + "\n");
    out << "records: " << run.records.size() << " (temperature " << c.kept_temperature << ", reflection "
        << c.kept_reflection << ")\n";
    return kOk;
}

}  // namespace

int execute(const RunSpec& input_spec, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const Config cfg = validate_config(input_spec.config);
    if (input_spec.dataset_path.empty()) throw ConfigError("no input dataset given");
    const auto staged = stage_inputs(input_spec, dir);
    const auto& spec = staged.spec;

    const auto format = dataset_format_from_string(spec.dataset_format);
    const auto dataset_text = read_file(spec.dataset_path);
    const auto problems = load_dataset_text(dataset_text, format, LoadOptions{cfg.mbpp_signature_hint});
    if (spec.command == "solve" && problems.size() != 1)
        throw ConfigError("solve expects exactly one problem record, got " + std::to_string(problems.size()));
    const auto dataset_hash = sha256_hex(dataset_text);

    auto engine = build_engine(spec);
    write_file((dir / "manifest.json").string(), manifest_json(spec, cfg, dataset_hash).dump(2) + "\n");

    if (spec.command == "solve") return run_solve(cfg, problems, engine, dir, out, err);
    if (spec.command == "bench") return run_bench(spec, cfg, problems, engine, dir, out);
    if (spec.command == "collect") return run_collect(spec, cfg, problems, engine, dir, dataset_hash, out, err);
    throw ConfigError("unknown command '" + spec.command + "'");
}

RunSpec spec_from_manifest(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const auto path = dir / "manifest.json";
    if (!fs::exists(path)) throw ConfigError("no manifest.json in '" + run_dir + "'");
    Json m;
    try {
        m = Json::parse(read_file(path.string()));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    auto resolve = [&](const Json& v) { return v.is_null() ? std::string() : (dir / v.get<std::string>()).string(); };
    try {
        RunSpec s;
        s.command = m.at("command").get<std::string>();
        for (const auto& [k, v] : m.at("config").items()) s.config[k] = v.get<std::string>();
        s.backend = BackendDescriptor::from_json(m.at("backend"));
        if (s.backend.kind == BackendKind::scripted_mock) s.backend.scenario_path = resolve(m["backend"]["scenario_path"]);
        s.executor = m.at("executor").at("kind").get<std::string>();
        s.outcomes_path = resolve(m["executor"]["outcomes"]);
        s.harness = m.at("harness").get<std::vector<std::string>>();
        s.normalizer = m.at("normalizer").get<std::string>();
        s.templates_dir = resolve(m.at("templates"));
        const auto& d = m.at("dataset");
        s.dataset_path = resolve(d.at("path"));
        s.dataset_format = d.at("format").get<std::string>();
        s.dataset_id = d.at("id").get<std::string>();
        const auto& o = m.at("options");
        s.pass_at_k = o.at("pass_at_k").get<bool>();
        s.temperatures = o.at("temperatures").get<std::vector<double>>();
        if (!o.at("reflection_t").is_null()) s.reflection_t = o["reflection_t"].get<double>();
        s.eval_dataset_path = resolve(o.at("eval_dataset"));
        return s;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
}

std::vector<std::string> replay_artifacts(const std::string& command, const std::string& run_dir) {
    std::vector<std::string> files = {"report.json"};
    if (command == "collect") files.push_back("dataset.jsonl");
    const fs::path traces = fs::path(run_dir) / "traces";
    if (fs::is_directory(traces)) {
        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(traces)) names.push_back(entry.path().filename().string());
        std::sort(names.begin(), names.end());
        for (auto& n : names) files.push_back("traces/" + n);
    }
    return files;
}

namespace {

int cmd_replay(const std::string& run_dir, std::string out_dir, std::ostream& out, std::ostream& err) {
    const auto spec = spec_from_manifest(run_dir);
    if (spec.backend.kind != BackendKind::scripted_mock)
        throw ConfigError("replay requires a run recorded with the scripted-mock backend");
    if (out_dir.empty()) out_dir = (fs::path(run_dir) / "replay").string();
    std::ostringstream sink;
    const int code = execute(spec, out_dir, sink, err);

    int mismatches = 0;
    auto original = replay_artifacts(spec.command, run_dir);
    auto replayed = replay_artifacts(spec.command, out_dir);
    for (const auto& f : replayed)
        if (std::find(original.begin(), original.end(), f) == original.end()) original.push_back(f);
    for (const auto& f : original) {
        const auto a = fs::path(run_dir) / f;
        const auto b = fs::path(out_dir) / f;
        if (!fs::exists(a) || !fs::exists(b) || read_file(a.string()) != read_file(b.string())) {
            err << "mismatch: " << f << '\n';
            ++mismatches;
        }
    }
    if (mismatches > 0) {
        err << "replay diverged in " << mismatches << " file(s)\n";
        return kPartial;
    }
    out << "replay reproduced " << original.size() << " file(s) exactly\n";
    return code;
}

struct CommonFlags {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> given;
    std::string backend = "mock";
    std::string backend_id;
    std::string scenario, endpoint, model, api_key_env = "CODEREFINE_API_KEY";
    int request_parallelism = 4;
    int retry_budget = 1;
    std::string executor = "stub";
    std::string outcomes;
    std::string harness;
    std::string normalizer = "lexical";
    std::string templates;
    std::string out = "run";
    std::string format = "mbpp-jsonl";
    std::string dataset;
};

void add_common(CLI::App& app, CommonFlags& f) {
    app.add_option("--config", f.config_file, "Config file of 'key = value' lines");
    for (const auto& key : config_keys()) {
        std::string names = "--" + key;
        auto dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        if (dashed != key) names += ",--" + dashed;
        if (key == "rng_seed") names += ",--seed";
        f.given[key] = app.add_option(names, f.values[key], "Config key '" + key + "'");
    }
    app.add_option("--backend", f.backend, "Generation backend")->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--backend-id", f.backend_id, "Identifier recorded with each solution");
    app.add_option("--scenario", f.scenario, "Scripted-mock scenario (JSON lines)");
    app.add_option("--endpoint", f.endpoint, "Chat-completions URL for the http backend");
    app.add_option("--model", f.model, "Model name sent to the http backend");
    app.add_option("--api-key-env", f.api_key_env, "Environment variable holding the API key");
    app.add_option("--request_parallelism,--request-parallelism", f.request_parallelism, "Concurrent backend calls");
    app.add_option("--retry_budget,--retry-budget", f.retry_budget, "Re-requests per unparsable sample");
    app.add_option("--executor", f.executor, "Test executor")->check(CLI::IsMember({"stub", "sandbox"}));
    app.add_option("--outcomes", f.outcomes, "Outcome table for the stub executor (JSON lines)");
    app.add_option("--harness", f.harness, "Harness command line for the sandbox executor/normalizer");
    app.add_option("--normalizer", f.normalizer, "Test fingerprinting")->check(CLI::IsMember({"lexical", "sandbox"}));
    app.add_option("--templates", f.templates, "Directory of <id>.txt prompt templates");
    app.add_option("--out", f.out, "Run directory");
    app.add_option("--format", f.format, "Dataset format")->check(CLI::IsMember({"mbpp-jsonl", "humaneval-jsonl"}));
}

RunSpec spec_from_flags(const std::string& command, const CommonFlags& f) {
    RunSpec s;
    s.command = command;
    if (!f.config_file.empty()) s.config = load_config_file(f.config_file);
    for (const auto& [key, opt] : f.given)
        if (opt->count() > 0) s.config[key] = f.values.at(key);
    s.backend.kind = f.backend == "http" ? BackendKind::http_chat : BackendKind::scripted_mock;
    s.backend.backend_id = f.backend_id.empty() ? f.backend : f.backend_id;
    s.backend.scenario_path = f.scenario;
    s.backend.endpoint = f.endpoint;
    s.backend.model = f.model;
    s.backend.api_key_env = f.api_key_env;
    s.backend.request_parallelism = f.request_parallelism;
    s.backend.retry_budget = f.retry_budget;
    s.executor = f.executor;
    s.outcomes_path = f.outcomes;
    s.harness = split_words(f.harness);
    s.normalizer = f.normalizer;
    s.templates_dir = f.templates;
    s.dataset_path = f.dataset;
    s.dataset_format = f.format;
    s.dataset_id = fs::path(f.dataset).stem().string();
    return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"coderefine: explore/refine code generation with a self-built testing pool"};
    app.require_subcommand(1);

    CommonFlags solve_f, bench_f, collect_f;
    auto* solve_cmd = app.add_subcommand("solve", "Refine a single problem");
    add_common(*solve_cmd, solve_f);
    solve_cmd->add_option("problem", solve_f.dataset, "File holding exactly one problem record")->required();

    bool pass_k = false;
    auto* bench_cmd = app.add_subcommand("bench", "Run every problem of a dataset and score on ground truth");
    add_common(*bench_cmd, bench_f);
    bench_cmd->add_option("dataset", bench_f.dataset, "Dataset (JSON lines)")->required();
    bench_cmd->add_flag("--pass-at-k,--pass_at_k", pass_k, "Also report Pass@k over the first exploration");

    std::vector<double> temperatures;
    double reflection_t = 0.0;
    std::string eval_dataset;
    auto* collect_cmd = app.add_subcommand("collect", "Collect verified trajectories for fine-tuning");
    add_common(*collect_cmd, collect_f);
    collect_cmd->add_option("dataset", collect_f.dataset, "Seed problems (JSON lines)")->required();
    collect_cmd->add_option("--temperatures", temperatures, "Temperature grid")->delimiter(',');
    auto* refl_opt = collect_cmd->add_option("--reflection-t,--reflection_t", reflection_t,
                                             "Temperature for reflection samples (defaults to t)");
    collect_cmd->add_option("--eval-dataset,--eval_dataset", eval_dataset, "Evaluation split that must stay disjoint");

    std::string replay_dir, replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a recorded run directory and compare its outputs");
    replay_cmd->add_option("run_dir", replay_dir, "Run directory holding manifest.json")->required();
    replay_cmd->add_option("--out", replay_out, "Where to write the replayed run (default <run_dir>/replay)");

    std::vector<std::string> argv_rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(argv_rest.begin(), argv_rest.end());
    try {
        app.parse(argv_rest);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*replay_cmd) return cmd_replay(replay_dir, replay_out, out, err);
        if (*solve_cmd) {
            auto spec = spec_from_flags("solve", solve_f);
            return execute(spec, solve_f.out, out, err);
        }
        if (*bench_cmd) {
            auto spec = spec_from_flags("bench", bench_f);
            spec.pass_at_k = pass_k;
            return execute(spec, bench_f.out, out, err);
        }
        auto spec = spec_from_flags("collect", collect_f);
        spec.temperatures = temperatures;
        if (refl_opt->count() > 0) spec.reflection_t = reflection_t;
        spec.eval_dataset_path = eval_dataset;
        return execute(spec, collect_f.out, out, err);
    } catch (const BackendError& e) {
        err << "backend failure: " << e.what() << '\n';
        return kBackendFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
}

}  // namespace coderefine::cli
