#pragma once

#include "json.hpp"

#include <string>
#include <vector>

namespace coderefine {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Parses one JSON value per non-blank line. Errors name `what` and the line.
std::vector<Json> parse_jsonl(const std::string& text, const std::string& what);

// Serializes each value on its own line, '\n'-terminated.
template <typename J>
std::string to_jsonl(const std::vector<J>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace coderefine
