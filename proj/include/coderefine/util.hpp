#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace coderefine {

using Rng = std::mt19937_64;

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

// Per-problem stream: run seed xor a stable hash of the problem id.
inline Rng problem_rng(std::uint64_t run_seed, std::string_view problem_id) {
    return Rng(run_seed ^ fnv1a64(problem_id));
}

// Uniform draw in [0, bound) by rejection, so results do not depend on the
// standard library's distribution implementation.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

// Uniformly chooses min(count, n) distinct indices of [0, n), returned in
// ascending order.
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t count);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
std::vector<std::string> read_lines(const std::string& path);

std::string trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Maps an id to a safe file stem ("HumanEval/0" -> "HumanEval_0").
std::string sanitize_filename(std::string_view id);

// Runs fn(i) for i in [0, count) on at most `workers` threads. The first
// exception thrown by any task is rethrown after all tasks finish.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace coderefine
