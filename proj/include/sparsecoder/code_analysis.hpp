#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sparsecoder/util.hpp"

namespace sparsecoder {

enum class IdentifierKind {
    Library,
    Class,
    Function,
    GlobalVariable,
    Parameter,
    LocalVariable,
    Attribute,
    Other,
};

const char* to_string(IdentifierKind kind);

/// One identifier occurrence in the source. is_global holds exactly for the
/// four module-scope kinds (library, class, function, global variable).
struct IdentifierOccurrence {
    std::string name;
    uint32_t start = 0;  // byte offset, half-open span
    uint32_t end = 0;
    IdentifierKind kind = IdentifierKind::Other;
    bool is_global = false;
};

struct IdentifierAnalysis {
    std::string source_digest;
    std::vector<IdentifierOccurrence> occurrences;  // sorted by span start
    bool parse_ok = true;
};

// ---------------------------------------------------------------------------
// Python lexing
// ---------------------------------------------------------------------------

enum class PyTokenType {
    Name,
    Keyword,
    Number,
    String,
    Op,
    Newline,
    Indent,
    Dedent,
    End,
    Error,
};

struct PyToken {
    PyTokenType type = PyTokenType::End;
    uint32_t start = 0;
    uint32_t end = 0;
    std::string text;
};

/// Lexes Python source into logical-line tokens with INDENT/DEDENT pairs.
/// Never throws on malformed input; bad characters become Error tokens.
std::vector<PyToken> lex_python(const std::string& source);

// ---------------------------------------------------------------------------
// Parse tree
// ---------------------------------------------------------------------------

enum class NodeType {
    Module,
    FunctionDef,
    ClassDef,
    Import,
    ImportFrom,
    Assign,
    AugAssign,
    AnnAssign,
    ExprStmt,
    Return,
    Delete,
    Raise,
    Assert,
    Pass,
    Break,
    Continue,
    Global,
    Nonlocal,
    If,
    While,
    For,
    With,
    Try,
    Suite,
    Error,
    // expressions
    Name,
    Attribute,
    Subscript,
    Call,
    Keyword,   // name=value inside a call
    BinOp,
    UnaryOp,
    BoolOp,
    Compare,
    IfExp,
    Lambda,
    NamedExpr,
    Starred,
    Num,
    Str,
    TupleExpr,
    ListExpr,
    SetExpr,
    DictExpr,
    Comprehension,
    CompClause,  // for target in iter [if cond]*
    Slice,
    Await,
    Yield,
    Param,
};

struct SyntaxNode {
    NodeType type;
    uint32_t start = 0;
    uint32_t end = 0;
    std::string text;  // name/attribute text where relevant
    std::vector<std::unique_ptr<SyntaxNode>> children;
    // FunctionDef/ClassDef/Import bookkeeping
    bool is_async = false;
    int aux = 0;  // decorator count on defs

    explicit SyntaxNode(NodeType t) : type(t) {}
    SyntaxNode* add(std::unique_ptr<SyntaxNode> child) {
        children.push_back(std::move(child));
        return children.back().get();
    }
};

struct SyntaxTree {
    std::unique_ptr<SyntaxNode> root;
    bool parse_ok = true;  // false when any error node was produced
};

struct AnalyzerOptions {
    /// When false, occurrences of `self` and `cls` parameters are omitted
    /// from the analysis entirely.
    bool include_self_cls = true;
};

/// Best-effort parse; syntax errors become Error nodes and clear parse_ok.
SyntaxTree parse_source(const std::string& source);

/// Classifies every identifier occurrence via module-level binding analysis.
/// A name is global iff its innermost binding lives at module scope.
IdentifierAnalysis extract_identifiers(const SyntaxTree& tree, const std::string& source,
                                       const AnalyzerOptions& options = {});

/// parse + extract in one step.
IdentifierAnalysis analyze_source(const std::string& source, const AnalyzerOptions& options = {});

}  // namespace sparsecoder
