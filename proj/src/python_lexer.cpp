#include <array>
#include <cctype>
#include <cstring>
#include <unordered_set>

#include "sparsecoder/code_analysis.hpp"

namespace sparsecoder {

namespace {

const std::unordered_set<std::string>& keywords() {
    static const std::unordered_set<std::string> kw = {
        "False",  "None",   "True",    "and",    "as",     "assert", "async",
        "await",  "break",  "class",   "continue", "def",  "del",    "elif",
        "else",   "except", "finally", "for",    "from",   "global", "if",
        "import", "in",     "is",      "lambda", "nonlocal", "not",  "or",
        "pass",   "raise",  "return",  "try",    "while",  "with",   "yield",
    };
    return kw;
}

bool is_name_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_name_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

bool is_string_prefix(const std::string& s) {
    if (s.size() > 2) return false;
    for (char c : s) {
        char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
    }
    return !s.empty();
}

// Multi-character operators, longest first.
const char* kOps3[] = {"**=", "//=", ">>=", "<<=", "...", "!=="};
const char* kOps2[] = {"**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=",
                       "+=", "-=", "*=", "/=", "%=", "@=", "&=", "|=", "^="};

}  // namespace

std::vector<PyToken> lex_python(const std::string& src) {
    std::vector<PyToken> out;
    std::vector<int> indents{0};
    size_t i = 0;
    const size_t len = src.size();
    int paren_depth = 0;
    bool at_line_start = true;
    bool line_has_content = false;

    auto push = [&](PyTokenType t, size_t start, size_t end, std::string text = {}) {
        out.push_back({t, static_cast<uint32_t>(start), static_cast<uint32_t>(end), std::move(text)});
    };

    auto handle_indent = [&](int col, size_t pos) {
        if (col > indents.back()) {
            indents.push_back(col);
            push(PyTokenType::Indent, pos, pos);
        } else {
            while (col < indents.back()) {
                indents.pop_back();
                push(PyTokenType::Dedent, pos, pos);
            }
            if (col != indents.back()) {
                // Inconsistent dedent level.
                push(PyTokenType::Error, pos, pos, "bad dedent");
            }
        }
    };

    while (i < len) {
        if (at_line_start && paren_depth == 0) {
            // Measure indentation; skip blank and comment-only lines.
            size_t line_begin = i;
            int col = 0;
            while (i < len && (src[i] == ' ' || src[i] == '\t')) {
                col += src[i] == '\t' ? 8 - (col % 8) : 1;
                ++i;
            }
            if (i >= len) break;
            if (src[i] == '\n' || src[i] == '\r') {
                while (i < len && (src[i] == '\n' || src[i] == '\r')) ++i;
                continue;
            }
            if (src[i] == '#') {
                while (i < len && src[i] != '\n') ++i;
                continue;
            }
            handle_indent(col, line_begin + (i - line_begin));
            at_line_start = false;
            line_has_content = false;
            continue;
        }

        const char c = src[i];
        if (c == '\n' || c == '\r') {
            if (paren_depth > 0) {
                ++i;
                continue;
            }
            if (line_has_content) push(PyTokenType::Newline, i, i + 1);
            while (i < len && (src[i] == '\n' || src[i] == '\r')) ++i;
            at_line_start = true;
            continue;
        }
        if (c == ' ' || c == '\t') {
            ++i;
            continue;
        }
        if (c == '#') {
            while (i < len && src[i] != '\n') ++i;
            continue;
        }
        if (c == '\\' && i + 1 < len && (src[i + 1] == '\n' || src[i + 1] == '\r')) {
            i += 2;
            while (i < len && src[i] == '\n') ++i;
            continue;
        }

        line_has_content = true;

        if (is_name_start(static_cast<unsigned char>(c))) {
            size_t start = i;
            while (i < len && is_name_char(static_cast<unsigned char>(src[i]))) ++i;
            std::string text = src.substr(start, i - start);
            // String prefix directly followed by a quote is part of the string.
            if (is_string_prefix(text) && i < len && (src[i] == '"' || src[i] == '\'')) {
                i = start;  // re-lex as string below
            } else {
                push(keywords().count(text) ? PyTokenType::Keyword : PyTokenType::Name, start, i,
                     std::move(text));
                continue;
            }
        }

        if (src[i] == '"' || src[i] == '\'' || is_name_start(static_cast<unsigned char>(src[i]))) {
            // String literal, possibly prefixed (r, b, u, f combinations).
            size_t start = i;
            bool raw = false;
            while (i < len && is_name_char(static_cast<unsigned char>(src[i]))) {
                char l = static_cast<char>(std::tolower(static_cast<unsigned char>(src[i])));
                if (l == 'r') raw = true;
                ++i;
            }
            if (i >= len || (src[i] != '"' && src[i] != '\'')) {
                push(PyTokenType::Error, start, i, "bad token");
                continue;
            }
            const char quote = src[i];
            const bool triple = i + 2 < len && src[i + 1] == quote && src[i + 2] == quote;
            i += triple ? 3 : 1;
            bool closed = false;
            while (i < len) {
                if (!raw && src[i] == '\\') {
                    i += 2;
                    continue;
                }
                if (triple) {
                    if (src[i] == quote && i + 2 < len && src[i + 1] == quote &&
                        src[i + 2] == quote) {
                        i += 3;
                        closed = true;
                        break;
                    }
                    ++i;
                } else {
                    if (src[i] == quote) {
                        ++i;
                        closed = true;
                        break;
                    }
                    if (src[i] == '\n') break;  // unterminated single-quoted string
                    ++i;
                }
            }
            if (i > len) i = len;
            push(closed ? PyTokenType::String : PyTokenType::Error, start, i,
                 closed ? "" : "unterminated string");
            continue;
        }

        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < len && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            size_t start = i;
            while (i < len) {
                char d = src[i];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || d == '_') {
                    ++i;
                } else if ((d == '+' || d == '-') && i > start &&
                           (src[i - 1] == 'e' || src[i - 1] == 'E') &&
                           std::isdigit(static_cast<unsigned char>(src[start]))) {
                    ++i;  // exponent sign
                } else {
                    break;
                }
            }
            push(PyTokenType::Number, start, i);
            continue;
        }

        // Operators and punctuation.
        bool matched = false;
        for (const char* op : kOps3) {
            size_t l = std::strlen(op);
            if (i + l <= len && src.compare(i, l, op) == 0) {
                push(PyTokenType::Op, i, i + l, op);
                i += l;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        for (const char* op : kOps2) {
            if (i + 2 <= len && src.compare(i, 2, op) == 0) {
                push(PyTokenType::Op, i, i + 2, op);
                i += 2;
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::strchr("+-*/%@&|^~<>()[]{}:;,.=", c)) {
            if (c == '(' || c == '[' || c == '{') ++paren_depth;
            if (c == ')' || c == ']' || c == '}') paren_depth = std::max(0, paren_depth - 1);
            push(PyTokenType::Op, i, i + 1, std::string(1, c));
            ++i;
            continue;
        }
        push(PyTokenType::Error, i, i + 1, "bad character");
        ++i;
    }

    if (line_has_content && (out.empty() || out.back().type != PyTokenType::Newline))
        push(PyTokenType::Newline, len, len);
    while (indents.size() > 1) {
        indents.pop_back();
        push(PyTokenType::Dedent, len, len);
    }
    push(PyTokenType::End, len, len);
    return out;
}

}  // namespace sparsecoder
