#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace coderefine {

// Source of syntax-tree fingerprints. Returning nullopt means the tree could
// not be produced (no runtime, or unparseable source).
class Normalizer {
public:
    virtual ~Normalizer() = default;
    virtual std::optional<std::string> tree_fingerprint(std::string_view source) = 0;
};

// Never produces tree fingerprints; every fingerprint is lexical-grade.
class LexicalNormalizer final : public Normalizer {
public:
    std::optional<std::string> tree_fingerprint(std::string_view) override { return std::nullopt; }
};

inline constexpr std::string_view kTreeGradePrefix = "ast:";
inline constexpr std::string_view kLexicalGradePrefix = "lex:";

// Token stream of Python-like source with comments, redundant whitespace and
// line continuations removed. Logical lines are separated by '\n' and each
// line is prefixed with its block depth.
std::string lexical_normalize(std::string_view source);

// "ast:<hash>" when the normalizer yields a tree, otherwise "lex:<sha256>" of
// the lexical normal form. Never throws for non-empty input.
std::string canonical_fingerprint(std::string_view source, Normalizer& normalizer);

inline bool is_lexical_grade(std::string_view fingerprint) {
    return fingerprint.substr(0, kLexicalGradePrefix.size()) == kLexicalGradePrefix;
}

}  // namespace coderefine
