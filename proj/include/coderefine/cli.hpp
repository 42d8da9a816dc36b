#pragma once

#include "coderefine/core.hpp"
#include "coderefine/exploration.hpp"
#include "coderefine/jsonl.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coderefine::cli {

inline constexpr std::string_view kEngineVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigError = 1, kBackendFailure = 2, kPartial = 3 };

// Everything needed to run (or re-run) one command.
struct RunSpec {
    std::string command;  // solve | bench | collect
    RawConfig config;
    BackendDescriptor backend;
    std::string executor = "stub";  // stub | sandbox
    std::string outcomes_path;      // stub table, may be empty
    std::vector<std::string> harness;
    std::string normalizer = "lexical";  // lexical | sandbox
    std::string templates_dir;
    std::string dataset_path;
    std::string dataset_format = "mbpp-jsonl";
    std::string dataset_id;
    bool pass_at_k = false;
    std::vector<double> temperatures;
    std::optional<double> reflection_t;
    std::string eval_dataset_path;
};

// Copies inputs under <out_dir>/inputs, writes manifest.json, then runs the
// command. Returns the process exit code.
int execute(const RunSpec& spec, const std::string& out_dir, std::ostream& out, std::ostream& err);

// Rebuilds the RunSpec recorded in <run_dir>/manifest.json; input paths resolve
// against run_dir.
RunSpec spec_from_manifest(const std::string& run_dir);

// Files compared by replay for a given command, relative to the run dir.
std::vector<std::string> replay_artifacts(const std::string& command, const std::string& run_dir);

// argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coderefine::cli
