// Stand-in for the in-sandbox runner. Reacts to markers in the request:
//   HANG     never answers            SLEEPY  answers "timeout" after timeout_ms
//   CRASH    aborts without output    GARBAGE prints a non-JSON line
//   FAIL     assertion failure        TYPEERR TypeError
//   CHATTY   writes to stderr first   OLDPROTO answers with v = 0
// normalize mode returns "t-" + the source with all whitespace removed, or an
// error for sources containing UNPARSEABLE.

#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <iterator>
#include <string>
#include <thread>

using nlohmann::json;

int main() {
    const std::string input((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    json req;
    try {
        req = json::parse(input);
    } catch (...) {
        return 2;
    }
    const std::string test = req.value("test_source", std::string());
    const std::string solution = req.value("solution_source", std::string());
    const auto has = [&](const char* marker) {
        return test.find(marker) != std::string::npos || solution.find(marker) != std::string::npos;
    };
    json resp = {{"v", 1}};

    if (req.value("mode", std::string()) == "normalize") {
        if (has("UNPARSEABLE")) {
            resp["status"] = "error";
            resp["error_class"] = "SyntaxError";
        } else {
            std::string compact;
            for (char c : test)
                if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
            resp["status"] = "pass";
            resp["tree_fingerprint"] = "t-" + compact;
        }
        std::cout << resp.dump() << "\n";
        return 0;
    }

    if (has("HANG")) std::this_thread::sleep_for(std::chrono::hours(1));
    if (has("CRASH")) std::abort();
    if (has("GARBAGE")) {
        std::cout << "Traceback (most recent call last): oops\n";
        return 0;
    }
    if (has("CHATTY")) std::cerr << "debug output from the candidate\n";
    if (has("OLDPROTO")) resp["v"] = 0;

    if (has("SLEEPY")) {
        std::this_thread::sleep_for(std::chrono::milliseconds(req.value("timeout_ms", 1000)));
        resp["status"] = "timeout";
        resp["error_class"] = "TimeoutError";
    } else if (has("FAIL")) {
        resp["status"] = "fail";
        resp["error_class"] = "AssertionError";
        resp["message"] = "assert 1 == 2";
        resp["traceback_tail"] = json::array({"File \"<test>\", line 1", "AssertionError"});
    } else if (has("TYPEERR")) {
        resp["status"] = "error";
        resp["error_class"] = "TypeError";
        resp["message"] = "unsupported operand";
    } else {
        resp["status"] = "pass";
    }
    resp["duration_ms"] = 1;
    std::cout << resp.dump() << "\n";
    return 0;
}
