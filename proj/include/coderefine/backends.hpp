#pragma once

#include "coderefine/exploration.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace coderefine {

// Replays a scenario file. Each JSON-lines record carries "response" (or
// "error" to simulate an outage) and optionally "problem_id", "iteration",
// "sample_index", "attempt", "tag" and "completion_tokens". Absent keys are
// wildcards; the most specific matching record wins, ties go to the earliest.
class ScriptedMockBackend final : public Backend {
public:
    struct Record {
        std::optional<std::string> problem_id;
        std::optional<int> iteration;
        std::optional<int> sample_index;
        std::optional<int> attempt;
        std::optional<std::string> tag;
        std::string response;
        std::optional<std::string> error;
        std::optional<long long> completion_tokens;
    };

    ScriptedMockBackend(BackendDescriptor descriptor, std::vector<Record> records);
    static std::unique_ptr<ScriptedMockBackend> from_file(BackendDescriptor descriptor);
    static std::vector<Record> parse_scenario(const std::string& jsonl_text);

    const BackendDescriptor& descriptor() const override { return descriptor_; }
    GenerationResponse generate(const GenerationRequest& request) override;

    // Every request seen so far, in arrival order.
    std::vector<GenerationRequest> requests() const;
    std::size_t request_count() const;

private:
    BackendDescriptor descriptor_;
    std::vector<Record> records_;
    mutable std::mutex mutex_;
    std::vector<GenerationRequest> log_;
};

// OpenAI-style chat completions: POST {model, temperature, messages}; reads
// choices[0].message.content and usage.completion_tokens.
class HttpChatBackend final : public Backend {
public:
    explicit HttpChatBackend(BackendDescriptor descriptor);

    const BackendDescriptor& descriptor() const override { return descriptor_; }
    GenerationResponse generate(const GenerationRequest& request) override;

    static std::string request_body(const std::string& model, double temperature, const std::string& prompt);
    static GenerationResponse parse_body(const std::string& body);

private:
    BackendDescriptor descriptor_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
    std::string api_key_;
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

}  // namespace coderefine
