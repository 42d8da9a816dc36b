#include "coderefine/fingerprint.hpp"

#include "coderefine/util.hpp"

#include <array>
#include <cctype>
#include <vector>

namespace coderefine {

namespace {

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }
bool is_string_prefix(char c) {
    switch (c) {
        case 'r': case 'R': case 'b': case 'B': case 'u': case 'U': case 'f': case 'F': return true;
        default: return false;
    }
}

constexpr std::array<std::string_view, 24> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "**",
    "//",  "<<",  ">>",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "@=",
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::string run() {
        indents_.push_back(0);
        while (pos_ < src_.size()) {
            if (line_start_ && depth_ == 0) {
                if (!begin_line()) continue;
            }
            step();
        }
        end_line();
        std::string out;
        for (std::size_t i = 0; i < lines_.size(); ++i) {
            if (i) out.push_back('\n');
            out += lines_[i];
        }
        return out;
    }

private:
    // Measures indentation of a physical line. Returns false when the line is
    // blank or comment-only (consumed entirely).
    bool begin_line() {
        std::size_t width = 0;
        auto p = pos_;
        while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
            width = src_[p] == '\t' ? (width / 8 + 1) * 8 : width + 1;
            ++p;
        }
        if (p >= src_.size()) {
            pos_ = p;
            return false;
        }
        if (src_[p] == '\n' || src_[p] == '\r' || src_[p] == '#') {
            while (p < src_.size() && src_[p] != '\n') ++p;
            pos_ = p < src_.size() ? p + 1 : p;
            return false;
        }
        pos_ = p;
        if (width > indents_.back()) {
            indents_.push_back(width);
        } else {
            while (indents_.size() > 1 && width < indents_.back()) indents_.pop_back();
        }
        level_ = indents_.size() - 1;
        line_start_ = false;
        return true;
    }

    void step() {
        const char c = src_[pos_];
        if (c == '\n') {
            ++pos_;
            if (depth_ == 0) {
                end_line();
                line_start_ = true;
            }
            return;
        }
        if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
            ++pos_;
            return;
        }
        if (c == '#') {
            while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
            return;
        }
        if (c == '\\' && pos_ + 1 < src_.size() && (src_[pos_ + 1] == '\n' || src_[pos_ + 1] == '\r')) {
            pos_ += 2;
            if (pos_ < src_.size() && src_[pos_ - 1] == '\r' && src_[pos_] == '\n') ++pos_;
            return;
        }
        if (c == '"' || c == '\'') {
            lex_string(pos_, pos_);
            return;
        }
        if (is_string_prefix(c)) {
            auto q = pos_ + 1;
            if (q < src_.size() && is_string_prefix(src_[q])) ++q;
            if (q < src_.size() && (src_[q] == '"' || src_[q] == '\'')) {
                lex_string(pos_, q);
                return;
            }
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            lex_number();
            return;
        }
        if (is_ident_start(static_cast<unsigned char>(c))) {
            const auto b = pos_;
            while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            tokens_.emplace_back(src_.substr(b, pos_ - b));
            return;
        }
        for (auto op : kOperators) {
            if (src_.substr(pos_, op.size()) == op) {
                tokens_.emplace_back(op);
                pos_ += op.size();
                return;
            }
        }
        if (c == '(' || c == '[' || c == '{') ++depth_;
        if ((c == ')' || c == ']' || c == '}') && depth_ > 0) --depth_;
        tokens_.emplace_back(1, c);
        ++pos_;
    }

    void lex_string(std::size_t begin, std::size_t quote_pos) {
        const char q = src_[quote_pos];
        const bool triple = src_.substr(quote_pos, 3) == std::string(3, q);
        const auto open = triple ? 3 : 1;
        auto p = quote_pos + open;
        const auto body_begin = p;
        bool escaped = false;
        while (p < src_.size()) {
            if (src_[p] == '\\') {
                escaped = true;
                p += 2;
                continue;
            }
            if (triple ? src_.substr(p, 3) == std::string(3, q) : src_[p] == q) break;
            if (!triple && src_[p] == '\n') break;
            ++p;
        }
        const auto body_end = std::min(p, src_.size());
        const auto end = std::min(src_.size(), p + (p < src_.size() ? open : 0));
        const auto body = src_.substr(body_begin, body_end - body_begin);
        pos_ = end;

        const bool plain = begin == quote_pos && !triple && !escaped &&
                           body.find('"') == std::string_view::npos && body.find('\'') == std::string_view::npos;
        if (plain) {
            tokens_.push_back("\"" + std::string(body) + "\"");
        } else {
            tokens_.emplace_back(src_.substr(begin, end - begin));
        }
    }

    void lex_number() {
        const auto b = pos_;
        const bool hex_like = src_[pos_] == '0' && pos_ + 1 < src_.size() &&
                              std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
                ++pos_;
                if (!hex_like && (c == 'e' || c == 'E') && pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
                    ++pos_;
                continue;
            }
            break;
        }
        tokens_.emplace_back(src_.substr(b, pos_ - b));
    }

    void end_line() {
        if (tokens_.empty()) return;
        std::string line = std::to_string(level_) + "|";
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            if (i) line.push_back(' ');
            line += tokens_[i];
        }
        lines_.push_back(std::move(line));
        tokens_.clear();
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    bool line_start_ = true;
    std::size_t level_ = 0;
    std::vector<std::size_t> indents_;
    std::vector<std::string> tokens_;
    std::vector<std::string> lines_;
};

}  // namespace

std::string lexical_normalize(std::string_view source) { return Lexer(source).run(); }

std::string canonical_fingerprint(std::string_view source, Normalizer& normalizer) {
    std::optional<std::string> tree;
    try {
        tree = normalizer.tree_fingerprint(source);
    } catch (const std::exception&) {
        tree.reset();
    }
    if (tree && !tree->empty()) return std::string(kTreeGradePrefix) + *tree;
    return std::string(kLexicalGradePrefix) + sha256_hex(lexical_normalize(source));
}

}  // namespace coderefine
