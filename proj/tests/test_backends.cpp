#include "coderefine/backends.hpp"

#include "support.hpp"

#include "httplib.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

using namespace coderefine;
using namespace testsupport;

namespace {

GenerationRequest request(const std::string& problem, int iteration, int sample, int attempt = 0,
                          const std::string& tag = "solve") {
    GenerationRequest r;
    r.problem_id = problem;
    r.iteration = iteration;
    r.sample_index = sample;
    r.attempt = attempt;
    r.tag = tag;
    r.temperature = 0.5;
    r.prompt = "prompt";
    return r;
}

}  // namespace

TEST(ScriptedMock, MostSpecificRecordWins) {
    ScriptedMockBackend backend(mock_descriptor(), {
                                                       record(std::nullopt, std::nullopt, std::nullopt, "any"),
                                                       record("p", std::nullopt, std::nullopt, "problem"),
                                                       record("p", 1, std::nullopt, "iteration"),
                                                       record("p", 1, 2, "exact"),
                                                       record("p", 1, 2, "shadowed"),
                                                   });
    EXPECT_EQ(backend.generate(request("q", 0, 0)).text, "any");
    EXPECT_EQ(backend.generate(request("p", 0, 0)).text, "problem");
    EXPECT_EQ(backend.generate(request("p", 1, 0)).text, "iteration");
    EXPECT_EQ(backend.generate(request("p", 1, 2)).text, "exact");
    EXPECT_EQ(backend.request_count(), 4u);
    EXPECT_EQ(backend.requests()[2].iteration, 1);
}

TEST(ScriptedMock, TagAndAttemptAreKeys) {
    auto tagged = record("p", 0, 0, "collected");
    tagged.tag = "collect-temperature";
    auto retry = record("p", 0, 0, "second try");
    retry.attempt = 1;
    ScriptedMockBackend backend(mock_descriptor(), {record("p", 0, 0, "first"), tagged, retry});
    EXPECT_EQ(backend.generate(request("p", 0, 0)).text, "first");
    EXPECT_EQ(backend.generate(request("p", 0, 0, 1)).text, "second try");
    EXPECT_EQ(backend.generate(request("p", 0, 0, 0, "collect-temperature")).text, "collected");
}

TEST(ScriptedMock, MissingEntryAndInjectedError) {
    auto outage = record("p", 3, std::nullopt, "");
    outage.error = "503 from upstream";
    ScriptedMockBackend backend(mock_descriptor(), {record("p", 0, std::nullopt, "ok"), outage});
    EXPECT_THROW(backend.generate(request("q", 0, 0)), BackendError);
    try {
        backend.generate(request("p", 3, 1));
        FAIL();
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
    }
}

TEST(ScriptedMock, TokensReportedOrAbsent) {
    ScriptedMockBackend backend(mock_descriptor(), {record("p", 0, 0, "x", 12), record("p", 0, 1, "y", std::nullopt)});
    EXPECT_EQ(backend.generate(request("p", 0, 0)).completion_tokens, 12);
    EXPECT_FALSE(backend.generate(request("p", 0, 1)).completion_tokens.has_value());
}

TEST(ScriptedMock, ScenarioFile) {
    TempDir dir;
    write_file(dir.file("s.jsonl"),
               "{\"problem_id\":\"p\",\"iteration\":0,\"sample_index\":0,\"response\":\"hello\",\"completion_tokens\":3}\n"
               "\n"
               "{\"problem_id\":\"p\",\"error\":\"down\"}\n");
    auto d = mock_descriptor();
    d.scenario_path = dir.file("s.jsonl");
    auto backend = make_backend(d);
    EXPECT_EQ(backend->generate(request("p", 0, 0)).text, "hello");
    EXPECT_THROW(backend->generate(request("p", 1, 0)), BackendError);

    write_file(dir.file("bad.jsonl"), "{\"problem_id\":\"p\"}\n");
    d.scenario_path = dir.file("bad.jsonl");
    EXPECT_THROW(make_backend(d), std::runtime_error);
    d.scenario_path = dir.file("missing.jsonl");
    EXPECT_THROW(make_backend(d), std::runtime_error);
}

TEST(HttpChat, RequestAndResponseShapes) {
    const auto body = Json::parse(HttpChatBackend::request_body("m1", 0.25, "hi"));
    EXPECT_EQ(body["model"], "m1");
    EXPECT_EQ(body["temperature"], 0.25);
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(body["messages"][0]["content"], "hi");

    const auto r = HttpChatBackend::parse_body(
        R"({"choices":[{"message":{"role":"assistant","content":"out"}}],"usage":{"completion_tokens":9}})");
    EXPECT_EQ(r.text, "out");
    EXPECT_EQ(r.completion_tokens, 9);
    EXPECT_FALSE(HttpChatBackend::parse_body(R"({"choices":[{"message":{"content":"x"}}]})").completion_tokens);
    EXPECT_THROW(HttpChatBackend::parse_body("not json"), BackendError);
    EXPECT_THROW(HttpChatBackend::parse_body(R"({"choices":[]})"), BackendError);
}

TEST(HttpChat, TalksToLocalServer) {
    httplib::Server server;
    std::string seen_auth;
    std::string seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        res.set_content(R"({"choices":[{"message":{"content":"```python\nx = 1\n```"}}],"usage":{"completion_tokens":4}})",
                        "application/json");
    });
    server.Post("/fail", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("CODEREFINE_TEST_KEY", "sk-test-123", 1);
    BackendDescriptor d;
    d.backend_id = "local";
    d.kind = BackendKind::http_chat;
    d.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    d.model = "tiny";
    d.api_key_env = "CODEREFINE_TEST_KEY";
    auto backend = make_backend(d);
    const auto r = backend->generate(request("p", 0, 0));
    EXPECT_EQ(r.completion_tokens, 4);
    EXPECT_NE(r.text.find("x = 1"), std::string::npos);
    EXPECT_EQ(seen_auth, "Bearer sk-test-123");
    EXPECT_EQ(Json::parse(seen_body)["model"], "tiny");

    // The descriptor names the variable but never carries the key.
    EXPECT_EQ(backend->descriptor().to_json().dump().find("sk-test-123"), std::string::npos);

    d.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/fail";
    EXPECT_THROW(make_backend(d)->generate(request("p", 0, 0)), BackendError);

    server.stop();
    thread.join();
    ::unsetenv("CODEREFINE_TEST_KEY");
}

TEST(HttpChat, UnreachableIsBackendError) {
    BackendDescriptor d;
    d.kind = BackendKind::http_chat;
    d.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    EXPECT_THROW(make_backend(d)->generate(request("p", 0, 0)), BackendError);
    d.endpoint = "localhost/no-scheme";
    EXPECT_THROW(make_backend(d), ContractViolation);
}
