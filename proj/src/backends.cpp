#include "coderefine/backends.hpp"

#include "coderefine/util.hpp"

#include "httplib.h"

#include <cstdlib>

namespace coderefine {

ScriptedMockBackend::ScriptedMockBackend(BackendDescriptor descriptor, std::vector<Record> records)
    : descriptor_(std::move(descriptor)), records_(std::move(records)) {}

std::vector<ScriptedMockBackend::Record> ScriptedMockBackend::parse_scenario(const std::string& jsonl_text) {
    std::vector<Record> out;
    for (const auto& j : parse_jsonl(jsonl_text, "scenario")) {
        Record r;
        if (j.contains("problem_id")) r.problem_id = j.at("problem_id").get<std::string>();
        if (j.contains("iteration")) r.iteration = j.at("iteration").get<int>();
        if (j.contains("sample_index")) r.sample_index = j.at("sample_index").get<int>();
        if (j.contains("attempt")) r.attempt = j.at("attempt").get<int>();
        if (j.contains("tag")) r.tag = j.at("tag").get<std::string>();
        if (j.contains("error")) r.error = j.at("error").get<std::string>();
        if (j.contains("completion_tokens")) r.completion_tokens = j.at("completion_tokens").get<long long>();
        if (!r.error && !j.contains("response")) throw std::runtime_error("scenario record without 'response'");
        r.response = j.value("response", std::string());
        out.push_back(std::move(r));
    }
    return out;
}

std::unique_ptr<ScriptedMockBackend> ScriptedMockBackend::from_file(BackendDescriptor descriptor) {
    descriptor.validate();
    auto records = parse_scenario(read_file(descriptor.scenario_path));
    return std::make_unique<ScriptedMockBackend>(std::move(descriptor), std::move(records));
}

GenerationResponse ScriptedMockBackend::generate(const GenerationRequest& request) {
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
    }
    const Record* best = nullptr;
    int best_score = -1;
    for (const auto& r : records_) {
        int score = 0;
        auto check = [&](const auto& field, const auto& value) {
            if (!field) return true;
            ++score;
            return *field == value;
        };
        if (!check(r.problem_id, request.problem_id) || !check(r.iteration, request.iteration) ||
            !check(r.sample_index, request.sample_index) || !check(r.attempt, request.attempt) ||
            !check(r.tag, request.tag))
            continue;
        if (score > best_score) {
            best = &r;
            best_score = score;
        }
    }
    if (!best)
        throw BackendError("scenario has no response for (" + request.problem_id + ", iteration " +
                           std::to_string(request.iteration) + ", sample " + std::to_string(request.sample_index) + ")");
    if (best->error) throw BackendError(*best->error);
    return GenerationResponse{best->response, best->completion_tokens};
}

std::vector<GenerationRequest> ScriptedMockBackend::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t ScriptedMockBackend::request_count() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

// ---------------------------------------------------------------------------

HttpChatBackend::HttpChatBackend(BackendDescriptor descriptor) : descriptor_(std::move(descriptor)) {
    descriptor_.validate();
    const auto& url = descriptor_.endpoint;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ContractViolation("endpoint must be an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    base_ = path_start == std::string::npos ? url : url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (const char* key = std::getenv(descriptor_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpChatBackend::request_body(const std::string& model, double temperature, const std::string& prompt) {
    OrderedJson j;
    j["model"] = model;
    j["temperature"] = temperature;
    j["messages"] = OrderedJson::array({OrderedJson{{"role", "user"}, {"content", prompt}}});
    return j.dump();
}

GenerationResponse HttpChatBackend::parse_body(const std::string& body) {
    Json j;
    try {
        j = Json::parse(body);
    } catch (const Json::exception& e) {
        throw BackendError(std::string("backend returned invalid JSON: ") + e.what());
    }
    GenerationResponse r;
    try {
        r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception&) {
        throw BackendError("backend response has no choices[0].message.content");
    }
    if (j.contains("usage") && j["usage"].is_object() && j["usage"].contains("completion_tokens"))
        r.completion_tokens = j["usage"]["completion_tokens"].get<long long>();
    return r;
}

GenerationResponse HttpChatBackend::generate(const GenerationRequest& request) {
    httplib::Client client(base_);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const auto res =
        client.Post(path_, headers, request_body(descriptor_.model, request.temperature, request.prompt), "application/json");
    if (!res) throw BackendError("backend unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw BackendError("backend returned HTTP " + std::to_string(res->status));
    return parse_body(res->body);
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor) {
    descriptor.validate();
    if (descriptor.kind == BackendKind::scripted_mock) return ScriptedMockBackend::from_file(descriptor);
    return std::make_unique<HttpChatBackend>(descriptor);
}

}  // namespace coderefine
