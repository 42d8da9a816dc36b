#include "coderefine/jsonl.hpp"

#include "coderefine/util.hpp"

#include <sstream>
#include <stdexcept>

namespace coderefine {

std::vector<Json> parse_jsonl(const std::string& text, const std::string& what) {
    std::vector<Json> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(Json::parse(line));
        } catch (const Json::exception& e) {
            throw std::runtime_error(what + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace coderefine
