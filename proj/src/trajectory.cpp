#include "coderefine/trajectory.hpp"

#include "coderefine/bench.hpp"
#include "coderefine/testing_pool.hpp"
#include "coderefine/util.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace coderefine {

CollectionCounters& CollectionCounters::operator+=(const CollectionCounters& o) {
    generated += o.generated;
    parse_failed += o.parse_failed;
    verified += o.verified;
    kept_temperature += o.kept_temperature;
    kept_reflection += o.kept_reflection;
    duplicates += o.duplicates;
    skipped_no_ground_truth += o.skipped_no_ground_truth;
    skipped_no_feedback += o.skipped_no_feedback;
    ineligible += o.ineligible;
    return *this;
}

std::string reflection_input(std::string_view input, std::string_view failed_output, std::string_view feedback) {
    std::string out(input);
    out += kFeedbackDelimiter;
    out += "Previous solution:\n```python\n";
    out += failed_output;
    out += "\n```\nFeedback:\n";
    out += feedback;
    out += "\n";
    return out;
}

namespace {

std::optional<ParsedResponse> generate_one(CollectionContext& ctx, const GenerationRequest& req,
                                           CollectionCounters& counters) {
    ++counters.generated;
    try {
        return parse_response(ctx.backend.generate(req).text);
    } catch (const ParseError&) {
        ++counters.parse_failed;
    } catch (const BackendError&) {
        ++counters.parse_failed;
    }
    return std::nullopt;
}

double ground_truth_rate(const Problem& problem, const std::string& program, CollectionContext& ctx) {
    CandidateSolution sol;
    sol.source = program;
    const auto report = ctx.executor.run_suite(sol, ground_truth_cases(problem), ctx.limits);
    return pass_rate(report);
}

// Feedback from the first generated test the program fails, if any.
std::optional<std::string> generated_test_feedback(const std::string& program, const std::vector<TestCase>& tests,
                                                   CollectionContext& ctx) {
    if (tests.empty()) return std::nullopt;
    CandidateSolution sol;
    sol.source = program;
    const auto report = ctx.executor.run_suite(sol, tests, ctx.limits);
    for (std::size_t i = 0; i < tests.size(); ++i) {
        const auto& o = report.outcomes[i];
        if (o.status != TestStatus::pass) return "Failed test:\n" + tests[i].source + "\n" + format_feedback(o);
    }
    return std::nullopt;
}

// Groups indices of `items` by key, keeping first-seen key order.
template <typename T, typename KeyFn>
std::vector<std::vector<std::size_t>> group_by(const std::vector<T>& items, KeyFn key) {
    std::vector<std::vector<std::size_t>> groups;
    std::map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < items.size(); ++i) {
        auto [it, fresh] = slot.emplace(key(items[i]), groups.size());
        if (fresh) groups.emplace_back();
        groups[it->second].push_back(i);
    }
    return groups;
}

}  // namespace

std::vector<TrajectoryRecord> collect_temperature(const std::vector<Problem>& problems, CollectionContext& ctx, int k,
                                                  const std::vector<double>& temperatures, CollectionCounters& counters,
                                                  std::vector<ReflectionCandidate>* failures) {
    struct PerProblem {
        std::vector<TrajectoryRecord> records;
        std::vector<ReflectionCandidate> failures;
        CollectionCounters counters;
    };
    std::vector<PerProblem> per(problems.size());

    parallel_for(problems.size(), static_cast<std::size_t>(ctx.problem_concurrency), [&](std::size_t pi) {
        const auto& problem = problems[pi];
        auto& out = per[pi];
        if (problem.ground_truth_tests.empty()) {
            ++out.counters.skipped_no_ground_truth;
            return;
        }
        const auto x = render_instruction(build_initial_instruction(problem, ctx.templates), ctx.templates,
                                          RenderOptions{ctx.m, {}});
        std::set<std::string> outputs;
        for (std::size_t ti = 0; ti < temperatures.size(); ++ti) {
            std::vector<ParsedResponse> samples;
            std::vector<TestCase> generated;
            for (int j = 0; j < k; ++j) {
                GenerationRequest req;
                req.problem_id = problem.id;
                req.iteration = static_cast<int>(ti);
                req.sample_index = j;
                req.temperature = temperatures[ti];
                req.prompt = x;
                req.tag = "collect-temperature";
                auto parsed = generate_one(ctx, req, out.counters);
                if (!parsed) continue;
                for (const auto& t : parsed->tests) {
                    TestCase tc;
                    tc.source = t.source;
                    tc.category = t.category;
                    tc.origin_iteration = static_cast<int>(ti);
                    tc.sample_index = j;
                    generated.push_back(std::move(tc));
                }
                samples.push_back(std::move(*parsed));
            }
            generated = dedup_tests(std::move(generated), ctx.normalizer);

            for (const auto& s : samples) {
                const double rate = ground_truth_rate(problem, s.program, ctx);
                ++out.counters.verified;
                if (rate == 1.0) {
                    if (!outputs.insert(s.program).second) {
                        ++out.counters.duplicates;
                        continue;
                    }
                    out.records.push_back(
                        TrajectoryRecord{problem.id, x, s.program, temperatures[ti], 1.0, TrajectoryKind::temperature});
                    ++out.counters.kept_temperature;
                } else if (failures) {
                    if (rate != 0.0) {
                        ++out.counters.ineligible;
                        continue;
                    }
                    auto feedback = generated_test_feedback(s.program, generated, ctx);
                    if (!feedback) {
                        ++out.counters.skipped_no_feedback;
                        continue;
                    }
                    out.failures.push_back(ReflectionCandidate{problem, x, s.program, *feedback, rate});
                }
            }
        }
    });

    std::vector<TrajectoryRecord> records;
    for (auto& p : per) {
        records.insert(records.end(), p.records.begin(), p.records.end());
        if (failures) failures->insert(failures->end(), p.failures.begin(), p.failures.end());
        counters += p.counters;
    }
    return records;
}

std::vector<TrajectoryRecord> collect_reflection(const std::vector<ReflectionCandidate>& failures,
                                                 CollectionContext& ctx, int k, double temperature,
                                                 CollectionCounters& counters) {
    const auto groups = group_by(failures, [](const ReflectionCandidate& c) { return c.problem.id; });
    struct PerProblem {
        std::vector<TrajectoryRecord> records;
        CollectionCounters counters;
    };
    std::vector<PerProblem> per(groups.size());

    parallel_for(groups.size(), static_cast<std::size_t>(ctx.problem_concurrency), [&](std::size_t gi) {
        auto& out = per[gi];
        std::set<std::string> outputs;
        int round = 0;
        for (auto idx : groups[gi]) {
            const auto& c = failures[idx];
            if (c.pass_rate != 0.0) {
                ++out.counters.ineligible;
                continue;
            }
            if (trim(c.feedback).empty()) {
                ++out.counters.skipped_no_feedback;
                continue;
            }
            const auto x_prime = reflection_input(c.input_text, c.failed_output, c.feedback);
            for (int j = 0; j < k; ++j) {
                GenerationRequest req;
                req.problem_id = c.problem.id;
                req.iteration = round;
                req.sample_index = j;
                req.temperature = temperature;
                req.prompt = x_prime;
                req.tag = "collect-reflection";
                auto parsed = generate_one(ctx, req, out.counters);
                if (!parsed) continue;
                const double rate = ground_truth_rate(c.problem, parsed->program, ctx);
                ++out.counters.verified;
                if (rate != 1.0) continue;
                if (!outputs.insert(parsed->program).second) {
                    ++out.counters.duplicates;
                    continue;
                }
                out.records.push_back(TrajectoryRecord{c.problem.id, x_prime, parsed->program, temperature, 1.0,
                                                       TrajectoryKind::reflection});
                ++out.counters.kept_reflection;
            }
            ++round;
        }
    });

    std::vector<TrajectoryRecord> records;
    for (auto& p : per) {
        records.insert(records.end(), p.records.begin(), p.records.end());
        counters += p.counters;
    }
    return records;
}

CollectionRun run_collection(const std::vector<Problem>& problems, CollectionContext& ctx, int k,
                             const std::vector<double>& temperatures, double reflection_t,
                             std::string source_dataset) {
    CollectionRun run;
    run.source_dataset = std::move(source_dataset);
    run.k = k;
    run.temperature_grid = temperatures;

    std::vector<ReflectionCandidate> failures;
    auto d = collect_temperature(problems, ctx, k, temperatures, run.counters, &failures);
    auto r = collect_reflection(failures, ctx, k, reflection_t, run.counters);

    std::set<std::pair<std::string, std::string>> seen;
    std::vector<TrajectoryRecord> all;
    for (auto* part : {&d, &r}) {
        for (auto& rec : *part) {
            if (!seen.emplace(rec.problem_id, rec.output_text).second) {
                ++run.counters.duplicates;
                continue;
            }
            all.push_back(std::move(rec));
        }
    }
    run.records = ordered_for_export(std::move(all));
    run.counters.kept_temperature = static_cast<int>(std::count_if(run.records.begin(), run.records.end(), [](const auto& x) {
        return x.kind == TrajectoryKind::temperature;
    }));
    run.counters.kept_reflection = static_cast<int>(run.records.size()) - run.counters.kept_temperature;
    return run;
}

void assert_disjoint_splits(const std::vector<Problem>& train, const std::vector<Problem>& eval) {
    std::set<std::string> ids;
    for (const auto& p : eval) ids.insert(p.id);
    for (const auto& p : train)
        if (ids.contains(p.id))
            throw std::runtime_error("problem '" + p.id + "' appears in both the collection and evaluation splits");
}

std::vector<TrajectoryRecord> ordered_for_export(std::vector<TrajectoryRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
        if (a.problem_id != b.problem_id) return a.problem_id < b.problem_id;
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    return records;
}

std::string dataset_jsonl(const std::vector<TrajectoryRecord>& records) {
    std::vector<OrderedJson> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        OrderedJson j;
        j["problem_id"] = r.problem_id;
        j["input_text"] = r.input_text;
        j["output_text"] = r.output_text;
        j["temperature"] = r.temperature;
        j["pass_rate"] = r.pass_rate;
        j["kind"] = to_string(r.kind);
        j["v"] = 1;
        rows.push_back(std::move(j));
    }
    return to_jsonl(rows);
}

OrderedJson export_dataset(const std::vector<TrajectoryRecord>& records, const std::string& dataset_path,
                           const std::string& manifest_path, const std::string& source_dataset_hash) {
    for (const auto& r : records) {
        if (r.pass_rate != 1.0)
            throw ContractViolation("record for '" + r.problem_id + "' has pass_rate below 1 and cannot be exported");
        const bool embeds = r.input_text.find(kFeedbackDelimiter) != std::string::npos;
        if (embeds != (r.kind == TrajectoryKind::reflection))
            throw ContractViolation("record for '" + r.problem_id + "' has a kind inconsistent with its input");
    }
    const auto ordered = ordered_for_export(records);
    const auto content = dataset_jsonl(ordered);
    write_file(dataset_path, content);

    int temperature_count = 0;
    std::map<std::string, int> histogram;
    for (const auto& r : ordered) {
        if (r.kind == TrajectoryKind::temperature) ++temperature_count;
        std::ostringstream key;
        key << r.temperature;
        ++histogram[key.str()];
    }
    OrderedJson manifest;
    manifest["v"] = 1;
    manifest["records"] = ordered.size();
    manifest["counts"] = {{"temperature", temperature_count},
                          {"reflection", static_cast<int>(ordered.size()) - temperature_count}};
    OrderedJson hist = OrderedJson::object();
    for (const auto& [key, count] : histogram) hist[key] = count;
    manifest["temperature_histogram"] = std::move(hist);
    manifest["source_dataset_sha256"] = source_dataset_hash;
    manifest["dataset_sha256"] = sha256_hex(content);
    write_file(manifest_path, manifest.dump(2) + "\n");
    return manifest;
}

}  // namespace coderefine
