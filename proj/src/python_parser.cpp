#include <cassert>

#include "sparsecoder/code_analysis.hpp"

namespace sparsecoder {

namespace {

using NodePtr = std::unique_ptr<SyntaxNode>;

NodePtr make(NodeType t, uint32_t start = 0, uint32_t end = 0) {
    auto n = std::make_unique<SyntaxNode>(t);
    n->start = start;
    n->end = end;
    return n;
}

struct ParseFail {};  // internal resync signal

class Parser {
  public:
    explicit Parser(std::vector<PyToken> tokens) : toks_(std::move(tokens)) {}

    SyntaxTree run() {
        SyntaxTree tree;
        tree.root = make(NodeType::Module);
        while (!at(PyTokenType::End)) {
            if (at(PyTokenType::Newline) || at(PyTokenType::Indent) || at(PyTokenType::Dedent)) {
                ++pos_;
                continue;
            }
            parse_statement_into(tree.root.get());
        }
        tree.parse_ok = !had_error_;
        if (!toks_.empty()) {
            tree.root->start = 0;
            tree.root->end = toks_.back().end;
        }
        return tree;
    }

  private:
    std::vector<PyToken> toks_;
    size_t pos_ = 0;
    bool had_error_ = false;

    const PyToken& cur() const { return toks_[pos_]; }
    const PyToken& peek(size_t k = 1) const {
        size_t p = pos_ + k;
        return toks_[p < toks_.size() ? p : toks_.size() - 1];
    }
    bool at(PyTokenType t) const { return cur().type == t; }
    bool at_op(const char* text) const { return at(PyTokenType::Op) && cur().text == text; }
    bool at_kw(const char* text) const { return at(PyTokenType::Keyword) && cur().text == text; }
    const PyToken& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    void expect_op(const char* text) {
        if (!at_op(text)) throw ParseFail{};
        advance();
    }
    void expect_kw(const char* text) {
        if (!at_kw(text)) throw ParseFail{};
        advance();
    }
    const PyToken& expect_name() {
        if (!at(PyTokenType::Name)) throw ParseFail{};
        return advance();
    }

    NodePtr name_node(const PyToken& tok) {
        auto n = make(NodeType::Name, tok.start, tok.end);
        n->text = tok.text;
        return n;
    }

    // Skip to the next statement boundary after an error.
    void resync() {
        had_error_ = true;
        int depth = 0;
        while (!at(PyTokenType::End)) {
            if (at(PyTokenType::Indent)) ++depth;
            if (at(PyTokenType::Dedent)) {
                if (depth == 0) break;
                --depth;
            }
            if (at(PyTokenType::Newline) && depth == 0) {
                advance();
                break;
            }
            advance();
        }
    }

    void parse_statement_into(SyntaxNode* parent) {
        const uint32_t start = cur().start;
        try {
            parent->add(parse_statement());
        } catch (ParseFail&) {
            auto err = make(NodeType::Error, start, cur().end);
            parent->add(std::move(err));
            resync();
        }
    }

    NodePtr parse_statement() {
        if (at(PyTokenType::Error)) throw ParseFail{};
        if (at_op("@")) return parse_decorated();
        if (at_kw("def")) return parse_funcdef(false);
        if (at_kw("async")) {
            advance();
            if (at_kw("def")) return parse_funcdef(true);
            if (at_kw("for")) return parse_for(true);
            if (at_kw("with")) return parse_with(true);
            throw ParseFail{};
        }
        if (at_kw("class")) return parse_classdef();
        if (at_kw("if")) return parse_if();
        if (at_kw("while")) return parse_while();
        if (at_kw("for")) return parse_for(false);
        if (at_kw("try")) return parse_try();
        if (at_kw("with")) return parse_with(false);
        if (at_kw("import")) return parse_import();
        if (at_kw("from")) return parse_import_from();
        return parse_simple_line();
    }

    NodePtr parse_decorated() {
        std::vector<NodePtr> decorators;
        const uint32_t start = cur().start;
        while (at_op("@")) {
            advance();
            decorators.push_back(parse_expression());
            if (at(PyTokenType::Newline)) advance();
        }
        NodePtr def;
        if (at_kw("def")) {
            def = parse_funcdef(false);
        } else if (at_kw("async")) {
            advance();
            expect_kw("def");
            pos_--;  // parse_funcdef expects to consume 'def'
            def = parse_funcdef(true);
        } else if (at_kw("class")) {
            def = parse_classdef();
        } else {
            throw ParseFail{};
        }
        def->start = start;
        def->aux = static_cast<int>(decorators.size());
        for (auto it = decorators.rbegin(); it != decorators.rend(); ++it)
            def->children.insert(def->children.begin(), std::move(*it));
        return def;
    }

    NodePtr parse_funcdef(bool is_async) {
        const uint32_t start = cur().start;
        expect_kw("def");
        const PyToken& name = expect_name();
        auto fn = make(NodeType::FunctionDef, start, name.end);
        fn->is_async = is_async;
        fn->text = name.text;
        fn->add(name_node(name));
        expect_op("(");
        parse_params_into(fn.get());
        expect_op(")");
        if (at_op("->")) {
            advance();
            fn->add(parse_expression());
        }
        expect_op(":");
        fn->add(parse_suite());
        fn->end = fn->children.back()->end;
        return fn;
    }

    void parse_params_into(SyntaxNode* fn) {
        while (!at_op(")")) {
            if (at_op("*") || at_op("**")) {
                advance();
                if (at(PyTokenType::Name)) {
                    const PyToken& p = advance();
                    auto param = make(NodeType::Param, p.start, p.end);
                    param->text = p.text;
                    if (at_op(":")) {
                        advance();
                        param->add(parse_expression());
                    }
                    fn->add(std::move(param));
                }
            } else if (at_op("/")) {
                advance();  // positional-only marker
            } else if (at(PyTokenType::Name)) {
                const PyToken& p = advance();
                auto param = make(NodeType::Param, p.start, p.end);
                param->text = p.text;
                if (at_op(":")) {
                    advance();
                    param->add(parse_expression());  // annotation
                }
                if (at_op("=")) {
                    advance();
                    param->add(parse_expression());  // default value
                }
                fn->add(std::move(param));
            } else {
                throw ParseFail{};
            }
            if (at_op(",")) {
                advance();
            } else {
                break;
            }
        }
    }

    NodePtr parse_classdef() {
        const uint32_t start = cur().start;
        expect_kw("class");
        const PyToken& name = expect_name();
        auto cls = make(NodeType::ClassDef, start, name.end);
        cls->text = name.text;
        cls->add(name_node(name));
        if (at_op("(")) {
            advance();
            while (!at_op(")")) {
                if (at(PyTokenType::Name) && peek().type == PyTokenType::Op && peek().text == "=") {
                    // keyword base (metaclass=...)
                    auto kw = make(NodeType::Keyword, cur().start, cur().end);
                    kw->text = cur().text;
                    advance();
                    advance();
                    kw->add(parse_expression());
                    cls->add(std::move(kw));
                } else {
                    cls->add(parse_expression());
                }
                if (at_op(",")) advance();
                else break;
            }
            expect_op(")");
        }
        expect_op(":");
        cls->add(parse_suite());
        cls->end = cls->children.back()->end;
        return cls;
    }

    // import a.b.c as d, e
    NodePtr parse_import() {
        const uint32_t start = cur().start;
        expect_kw("import");
        auto node = make(NodeType::Import, start, cur().end);
        while (true) {
            // Dotted path: root name then Attribute components.
            const PyToken& root = expect_name();
            auto item = make(NodeType::TupleExpr, root.start, root.end);  // (path..., alias?)
            item->add(name_node(root));
            while (at_op(".")) {
                advance();
                const PyToken& comp = expect_name();
                auto attr = make(NodeType::Attribute, comp.start, comp.end);
                attr->text = comp.text;
                item->add(std::move(attr));
            }
            if (at_kw("as")) {
                advance();
                const PyToken& alias = expect_name();
                auto a = make(NodeType::Name, alias.start, alias.end);
                a->text = alias.text;
                a->is_async = true;  // marks the alias slot; see scope pass
                item->add(std::move(a));
            }
            node->add(std::move(item));
            if (at_op(",")) advance();
            else break;
        }
        node->end = cur().start;
        end_simple_statement();
        return node;
    }

    // from .a.b import c as d, e   |   from x import *
    NodePtr parse_import_from() {
        const uint32_t start = cur().start;
        expect_kw("from");
        auto node = make(NodeType::ImportFrom, start, cur().end);
        while (at_op(".") || at_op("...")) advance();  // relative dots
        if (!at_kw("import")) {
            const PyToken& root = expect_name();
            auto path = make(NodeType::TupleExpr, root.start, root.end);
            path->add(name_node(root));
            while (at_op(".")) {
                advance();
                const PyToken& comp = expect_name();
                auto attr = make(NodeType::Attribute, comp.start, comp.end);
                attr->text = comp.text;
                path->add(std::move(attr));
            }
            node->add(std::move(path));
        }
        expect_kw("import");
        if (at_op("*")) {
            advance();
            node->end = cur().start;
            end_simple_statement();
            return node;
        }
        const bool parens = at_op("(");
        if (parens) advance();
        while (true) {
            if (parens && at_op(")")) break;
            const PyToken& name = expect_name();
            auto item = make(NodeType::ListExpr, name.start, name.end);  // (name, alias?)
            item->add(name_node(name));
            if (at_kw("as")) {
                advance();
                const PyToken& alias = expect_name();
                item->add(name_node(alias));
            }
            node->add(std::move(item));
            if (at_op(",")) advance();
            else break;
        }
        if (parens) expect_op(")");
        node->end = cur().start;
        end_simple_statement();
        return node;
    }

    void end_simple_statement() {
        if (at_op(";")) {
            advance();
            return;
        }
        if (at(PyTokenType::Newline)) {
            advance();
            return;
        }
        if (at(PyTokenType::End) || at(PyTokenType::Dedent)) return;
        throw ParseFail{};
    }

    NodePtr parse_suite() {
        auto suite = make(NodeType::Suite, cur().start, cur().end);
        if (at(PyTokenType::Newline)) {
            advance();
            if (!at(PyTokenType::Indent)) throw ParseFail{};
            advance();
            while (!at(PyTokenType::Dedent) && !at(PyTokenType::End)) {
                if (at(PyTokenType::Newline)) {
                    advance();
                    continue;
                }
                parse_statement_into(suite.get());
            }
            if (at(PyTokenType::Dedent)) advance();
        } else {
            // Inline suite: simple statements separated by ';'.
            suite->add(parse_simple_line());
        }
        if (!suite->children.empty()) {
            suite->start = suite->children.front()->start;
            suite->end = suite->children.back()->end;
        }
        return suite;
    }

    NodePtr parse_if() {
        const uint32_t start = cur().start;
        auto node = make(NodeType::If, start, cur().end);
        expect_kw("if");
        node->add(parse_expression());
        expect_op(":");
        node->add(parse_suite());
        while (at_kw("elif")) {
            advance();
            node->add(parse_expression());
            expect_op(":");
            node->add(parse_suite());
        }
        if (at_kw("else")) {
            advance();
            expect_op(":");
            node->add(parse_suite());
        }
        node->end = node->children.back()->end;
        return node;
    }

    NodePtr parse_while() {
        auto node = make(NodeType::While, cur().start, cur().end);
        expect_kw("while");
        node->add(parse_expression());
        expect_op(":");
        node->add(parse_suite());
        if (at_kw("else")) {
            advance();
            expect_op(":");
            node->add(parse_suite());
        }
        node->end = node->children.back()->end;
        return node;
    }

    NodePtr parse_for(bool is_async) {
        auto node = make(NodeType::For, cur().start, cur().end);
        node->is_async = is_async;
        expect_kw("for");
        node->add(parse_target_list());
        expect_kw("in");
        node->add(parse_expression_list());
        expect_op(":");
        node->add(parse_suite());
        if (at_kw("else")) {
            advance();
            expect_op(":");
            node->add(parse_suite());
        }
        node->end = node->children.back()->end;
        return node;
    }

    NodePtr parse_with(bool is_async) {
        auto node = make(NodeType::With, cur().start, cur().end);
        node->is_async = is_async;
        expect_kw("with");
        while (true) {
            auto item = make(NodeType::TupleExpr, cur().start, cur().end);  // (ctx, as-target?)
            item->add(parse_expression());
            if (at_kw("as")) {
                advance();
                item->add(parse_primary_target());
            }
            item->end = item->children.back()->end;
            node->add(std::move(item));
            if (at_op(",")) advance();
            else break;
        }
        expect_op(":");
        node->add(parse_suite());
        node->end = node->children.back()->end;
        return node;
    }

    NodePtr parse_try() {
        auto node = make(NodeType::Try, cur().start, cur().end);
        expect_kw("try");
        expect_op(":");
        node->add(parse_suite());
        while (at_kw("except")) {
            advance();
            auto handler = make(NodeType::TupleExpr, cur().start, cur().end);  // (type?, name?, body)
            if (!at_op(":")) {
                handler->add(parse_expression());
                if (at_kw("as")) {
                    advance();
                    const PyToken& name = expect_name();
                    auto alias = make(NodeType::Name, name.start, name.end);
                    alias->text = name.text;
                    alias->is_async = true;  // marks binding slot
                    handler->add(std::move(alias));
                }
            }
            expect_op(":");
            handler->add(parse_suite());
            handler->end = handler->children.back()->end;
            node->add(std::move(handler));
        }
        if (at_kw("else")) {
            advance();
            expect_op(":");
            node->add(parse_suite());
        }
        if (at_kw("finally")) {
            advance();
            expect_op(":");
            node->add(parse_suite());
        }
        node->end = node->children.back()->end;
        return node;
    }

    NodePtr parse_simple_line() {
        NodePtr first = parse_small_statement();
        if (at_op(";")) {
            // a; b; c on one line: wrap in a suite
            auto suite = make(NodeType::Suite, first->start, first->end);
            suite->add(std::move(first));
            while (at_op(";")) {
                advance();
                if (at(PyTokenType::Newline) || at(PyTokenType::End)) break;
                suite->add(parse_small_statement());
            }
            if (at(PyTokenType::Newline)) advance();
            suite->end = suite->children.back()->end;
            return suite;
        }
        end_simple_statement();
        return first;
    }

    NodePtr parse_small_statement() {
        if (at_kw("pass")) return keyword_stmt(NodeType::Pass);
        if (at_kw("break")) return keyword_stmt(NodeType::Break);
        if (at_kw("continue")) return keyword_stmt(NodeType::Continue);
        if (at_kw("return")) {
            auto node = make(NodeType::Return, cur().start, cur().end);
            advance();
            if (!at(PyTokenType::Newline) && !at_op(";") && !at(PyTokenType::End) &&
                !at(PyTokenType::Dedent))
                node->add(parse_expression_list());
            return node;
        }
        if (at_kw("raise")) {
            auto node = make(NodeType::Raise, cur().start, cur().end);
            advance();
            if (!at(PyTokenType::Newline) && !at_op(";") && !at(PyTokenType::End) &&
                !at(PyTokenType::Dedent)) {
                node->add(parse_expression());
                if (at_kw("from")) {
                    advance();
                    node->add(parse_expression());
                }
            }
            return node;
        }
        if (at_kw("del")) {
            auto node = make(NodeType::Delete, cur().start, cur().end);
            advance();
            node->add(parse_expression_list());
            return node;
        }
        if (at_kw("assert")) {
            auto node = make(NodeType::Assert, cur().start, cur().end);
            advance();
            node->add(parse_expression());
            if (at_op(",")) {
                advance();
                node->add(parse_expression());
            }
            return node;
        }
        if (at_kw("global") || at_kw("nonlocal")) {
            auto node = make(at_kw("global") ? NodeType::Global : NodeType::Nonlocal, cur().start,
                             cur().end);
            advance();
            while (true) {
                const PyToken& name = expect_name();
                node->add(name_node(name));
                if (at_op(",")) advance();
                else break;
            }
            return node;
        }
        if (at_kw("yield")) {
            auto node = make(NodeType::ExprStmt, cur().start, cur().end);
            node->add(parse_yield());
            return node;
        }
        return parse_expr_statement();
    }

    NodePtr keyword_stmt(NodeType t) {
        auto node = make(t, cur().start, cur().end);
        advance();
        return node;
    }

    NodePtr parse_yield() {
        auto node = make(NodeType::Yield, cur().start, cur().end);
        expect_kw("yield");
        if (at_kw("from")) {
            advance();
            node->add(parse_expression());
        } else if (!at(PyTokenType::Newline) && !at_op(")") && !at_op("]") && !at_op("}") &&
                   !at_op(";") && !at(PyTokenType::End) && !at(PyTokenType::Dedent) && !at_op(",")) {
            node->add(parse_expression_list());
        }
        return node;
    }

    // expr_stmt: target_list (= target_list)* = expr | target aug= expr |
    //            target : annotation [= expr] | expr
    NodePtr parse_expr_statement() {
        NodePtr first = parse_expression_list();
        static const char* aug_ops[] = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                        "&=", "|=", "^=", ">>=", "<<=", "**="};
        for (const char* op : aug_ops) {
            if (at_op(op)) {
                auto node = make(NodeType::AugAssign, first->start, cur().end);
                node->add(std::move(first));
                advance();
                node->add(parse_expression_list());
                node->end = node->children.back()->end;
                return node;
            }
        }
        if (at_op(":")) {
            advance();
            auto node = make(NodeType::AnnAssign, first->start, cur().end);
            node->add(std::move(first));
            node->add(parse_expression());  // annotation
            if (at_op("=")) {
                advance();
                node->add(parse_expression_list());
            }
            node->end = node->children.back()->end;
            return node;
        }
        if (at_op("=")) {
            auto node = make(NodeType::Assign, first->start, cur().end);
            node->add(std::move(first));
            while (at_op("=")) {
                advance();
                node->add(parse_expression_list());
            }
            node->end = node->children.back()->end;
            return node;
        }
        auto node = make(NodeType::ExprStmt, first->start, first->end);
        node->add(std::move(first));
        return node;
    }

    NodePtr parse_target_list() { return parse_expression_list(); }

    NodePtr parse_primary_target() {
        if (at_op("(") || at_op("[")) return parse_atom();
        NodePtr t = parse_postfix(parse_atom());
        return t;
    }

    // expression_list: expr (',' expr)* — builds a tuple when commas appear.
    NodePtr parse_expression_list() {
        NodePtr first = parse_expression();
        if (!at_op(",")) return first;
        auto tuple = make(NodeType::TupleExpr, first->start, first->end);
        tuple->add(std::move(first));
        while (at_op(",")) {
            advance();
            if (at(PyTokenType::Newline) || at_op("=") || at_op(":") || at_op(")") || at_op("]") ||
                at_op("}") || at(PyTokenType::End) || at(PyTokenType::Dedent) || at_op(";"))
                break;  // trailing comma
            tuple->add(parse_expression());
        }
        tuple->end = tuple->children.back()->end;
        return tuple;
    }

    NodePtr parse_expression() {
        if (at_kw("lambda")) return parse_lambda();
        if (at_kw("yield")) return parse_yield();
        NodePtr cond = parse_or();
        if (at_kw("if")) {
            auto node = make(NodeType::IfExp, cond->start, cond->end);
            node->add(std::move(cond));
            advance();
            node->add(parse_or());
            expect_kw("else");
            node->add(parse_expression());
            node->end = node->children.back()->end;
            return node;
        }
        return cond;
    }

    NodePtr parse_lambda() {
        auto node = make(NodeType::Lambda, cur().start, cur().end);
        expect_kw("lambda");
        while (!at_op(":")) {
            if (at_op("*") || at_op("**")) advance();
            const PyToken& p = expect_name();
            auto param = make(NodeType::Param, p.start, p.end);
            param->text = p.text;
            if (at_op("=")) {
                advance();
                param->add(parse_expression());
            }
            node->add(std::move(param));
            if (at_op(",")) advance();
            else break;
        }
        expect_op(":");
        node->add(parse_expression());
        node->end = node->children.back()->end;
        return node;
    }

    NodePtr binop(NodePtr lhs, NodePtr rhs, NodeType t) {
        auto node = make(t, lhs->start, rhs->end);
        node->add(std::move(lhs));
        node->add(std::move(rhs));
        return node;
    }

    NodePtr parse_or() {
        NodePtr lhs = parse_and();
        while (at_kw("or")) {
            advance();
            lhs = binop(std::move(lhs), parse_and(), NodeType::BoolOp);
        }
        return lhs;
    }

    NodePtr parse_and() {
        NodePtr lhs = parse_not();
        while (at_kw("and")) {
            advance();
            lhs = binop(std::move(lhs), parse_not(), NodeType::BoolOp);
        }
        return lhs;
    }

    NodePtr parse_not() {
        if (at_kw("not")) {
            const uint32_t start = cur().start;
            advance();
            auto node = make(NodeType::UnaryOp, start, 0);
            node->add(parse_not());
            node->end = node->children.back()->end;
            return node;
        }
        return parse_comparison();
    }

    NodePtr parse_comparison() {
        NodePtr lhs = parse_bitor();
        while (true) {
            if (at_op("<") || at_op(">") || at_op("<=") || at_op(">=") || at_op("==") ||
                at_op("!=")) {
                advance();
                lhs = binop(std::move(lhs), parse_bitor(), NodeType::Compare);
            } else if (at_kw("in")) {
                advance();
                lhs = binop(std::move(lhs), parse_bitor(), NodeType::Compare);
            } else if (at_kw("not") && peek().type == PyTokenType::Keyword && peek().text == "in") {
                advance();
                advance();
                lhs = binop(std::move(lhs), parse_bitor(), NodeType::Compare);
            } else if (at_kw("is")) {
                advance();
                if (at_kw("not")) advance();
                lhs = binop(std::move(lhs), parse_bitor(), NodeType::Compare);
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_bitor() {
        NodePtr lhs = parse_bitxor();
        while (at_op("|")) {
            advance();
            lhs = binop(std::move(lhs), parse_bitxor(), NodeType::BinOp);
        }
        return lhs;
    }

    NodePtr parse_bitxor() {
        NodePtr lhs = parse_bitand();
        while (at_op("^")) {
            advance();
            lhs = binop(std::move(lhs), parse_bitand(), NodeType::BinOp);
        }
        return lhs;
    }

    NodePtr parse_bitand() {
        NodePtr lhs = parse_shift();
        while (at_op("&")) {
            advance();
            lhs = binop(std::move(lhs), parse_shift(), NodeType::BinOp);
        }
        return lhs;
    }

    NodePtr parse_shift() {
        NodePtr lhs = parse_arith();
        while (at_op("<<") || at_op(">>")) {
            advance();
            lhs = binop(std::move(lhs), parse_arith(), NodeType::BinOp);
        }
        return lhs;
    }

    NodePtr parse_arith() {
        NodePtr lhs = parse_term();
        while (at_op("+") || at_op("-")) {
            advance();
            lhs = binop(std::move(lhs), parse_term(), NodeType::BinOp);
        }
        return lhs;
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        while (at_op("*") || at_op("/") || at_op("//") || at_op("%") || at_op("@")) {
            advance();
            lhs = binop(std::move(lhs), parse_factor(), NodeType::BinOp);
        }
        return lhs;
    }

    NodePtr parse_factor() {
        if (at_op("+") || at_op("-") || at_op("~")) {
            const uint32_t start = cur().start;
            advance();
            auto node = make(NodeType::UnaryOp, start, 0);
            node->add(parse_factor());
            node->end = node->children.back()->end;
            return node;
        }
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_unary_postfix();
        if (at_op("**")) {
            advance();
            return binop(std::move(base), parse_factor(), NodeType::BinOp);
        }
        return base;
    }

    NodePtr parse_unary_postfix() {
        if (at_kw("await")) {
            const uint32_t start = cur().start;
            advance();
            auto node = make(NodeType::Await, start, 0);
            node->add(parse_unary_postfix());
            node->end = node->children.back()->end;
            return node;
        }
        return parse_postfix(parse_atom());
    }

    NodePtr parse_postfix(NodePtr base) {
        while (true) {
            if (at_op(".")) {
                advance();
                if (!at(PyTokenType::Name)) throw ParseFail{};
                const PyToken& attr = advance();
                auto node = make(NodeType::Attribute, base->start, attr.end);
                node->text = attr.text;
                // Record the member token span on the Attribute node itself.
                auto member = make(NodeType::Name, attr.start, attr.end);
                member->text = attr.text;
                member->is_async = true;  // marks "this Name is an attribute member"
                node->add(std::move(base));
                node->add(std::move(member));
                base = std::move(node);
            } else if (at_op("(")) {
                advance();
                auto call = make(NodeType::Call, base->start, cur().end);
                call->add(std::move(base));
                while (!at_op(")")) {
                    if (at_op("*") || at_op("**")) {
                        advance();
                        auto star = make(NodeType::Starred, cur().start, cur().end);
                        star->add(parse_expression());
                        call->add(std::move(star));
                    } else if (at(PyTokenType::Name) && peek().type == PyTokenType::Op &&
                               peek().text == "=") {
                        auto kw = make(NodeType::Keyword, cur().start, cur().end);
                        kw->text = cur().text;
                        advance();
                        advance();
                        kw->add(parse_expression());
                        call->add(std::move(kw));
                    } else {
                        NodePtr arg = parse_expression();
                        if (at_kw("for") || at_kw("async")) {
                            arg = parse_comp_tail(std::move(arg), NodeType::Comprehension);
                        }
                        call->add(std::move(arg));
                    }
                    if (at_op(",")) advance();
                    else break;
                }
                expect_op(")");
                call->end = cur().start;
                base = std::move(call);
            } else if (at_op("[")) {
                advance();
                auto sub = make(NodeType::Subscript, base->start, cur().end);
                sub->add(std::move(base));
                sub->add(parse_slice_list());
                expect_op("]");
                sub->end = cur().start;
                base = std::move(sub);
            } else {
                return base;
            }
        }
    }

    NodePtr parse_slice_list() {
        auto list = make(NodeType::Slice, cur().start, cur().end);
        while (!at_op("]")) {
            // [a:b:c] pieces, any of which may be empty
            if (!at_op(":")) list->add(parse_expression());
            while (at_op(":")) {
                advance();
                if (!at_op(":") && !at_op("]") && !at_op(",")) list->add(parse_expression());
            }
            if (at_op(",")) advance();
            else break;
        }
        return list;
    }

    NodePtr parse_comp_tail(NodePtr element, NodeType kind) {
        auto comp = make(kind, element->start, element->end);
        comp->add(std::move(element));
        while (at_kw("for") || at_kw("async")) {
            if (at_kw("async")) advance();
            expect_kw("for");
            auto clause = make(NodeType::CompClause, cur().start, cur().end);
            clause->add(parse_comp_target_list());
            expect_kw("in");
            clause->add(parse_or());
            while (at_kw("if")) {
                advance();
                clause->add(parse_or());
            }
            clause->end = clause->children.back()->end;
            comp->add(std::move(clause));
        }
        comp->end = comp->children.back()->end;
        return comp;
    }

    // Comprehension targets must not consume the 'in' keyword.
    NodePtr parse_comp_target_list() {
        NodePtr first = parse_primary_target();
        if (!at_op(",")) return first;
        auto tuple = make(NodeType::TupleExpr, first->start, first->end);
        tuple->add(std::move(first));
        while (at_op(",")) {
            advance();
            if (at_kw("in")) break;
            tuple->add(parse_primary_target());
        }
        tuple->end = tuple->children.back()->end;
        return tuple;
    }

    NodePtr parse_atom() {
        if (at(PyTokenType::Name)) {
            const PyToken& tok = advance();
            NodePtr name = name_node(tok);
            if (at_op(":=")) {
                advance();
                auto named = make(NodeType::NamedExpr, name->start, cur().end);
                named->add(std::move(name));
                named->add(parse_expression());
                named->end = named->children.back()->end;
                return named;
            }
            return name;
        }
        if (at(PyTokenType::Number)) {
            const PyToken& tok = advance();
            return make(NodeType::Num, tok.start, tok.end);
        }
        if (at(PyTokenType::String)) {
            const PyToken& tok = advance();
            auto node = make(NodeType::Str, tok.start, tok.end);
            // Adjacent string literals concatenate.
            while (at(PyTokenType::String)) node->end = advance().end;
            return node;
        }
        if (at(PyTokenType::Keyword) &&
            (cur().text == "None" || cur().text == "True" || cur().text == "False")) {
            const PyToken& tok = advance();
            return make(NodeType::Num, tok.start, tok.end);
        }
        if (at_op("*")) {
            advance();
            auto star = make(NodeType::Starred, cur().start, cur().end);
            star->add(parse_expression());
            star->end = star->children.back()->end;
            return star;
        }
        if (at_op("(")) {
            advance();
            if (at_op(")")) {
                const PyToken& tok = advance();
                return make(NodeType::TupleExpr, tok.start, tok.end);
            }
            NodePtr inner = parse_expression();
            if (at_kw("for") || at_kw("async")) {
                inner = parse_comp_tail(std::move(inner), NodeType::Comprehension);
                expect_op(")");
                return inner;
            }
            if (at_op(",")) {
                auto tuple = make(NodeType::TupleExpr, inner->start, inner->end);
                tuple->add(std::move(inner));
                while (at_op(",")) {
                    advance();
                    if (at_op(")")) break;
                    tuple->add(parse_expression());
                }
                expect_op(")");
                return tuple;
            }
            expect_op(")");
            return inner;
        }
        if (at_op("[")) {
            advance();
            auto list = make(NodeType::ListExpr, cur().start, cur().end);
            if (at_op("]")) {
                advance();
                return list;
            }
            NodePtr first = parse_expression();
            if (at_kw("for") || at_kw("async")) {
                NodePtr comp = parse_comp_tail(std::move(first), NodeType::Comprehension);
                expect_op("]");
                return comp;
            }
            list->add(std::move(first));
            while (at_op(",")) {
                advance();
                if (at_op("]")) break;
                list->add(parse_expression());
            }
            expect_op("]");
            return list;
        }
        if (at_op("{")) {
            advance();
            if (at_op("}")) {
                const PyToken& tok = advance();
                return make(NodeType::DictExpr, tok.start, tok.end);
            }
            if (at_op("**")) {
                auto dict = make(NodeType::DictExpr, cur().start, cur().end);
                while (true) {
                    if (at_op("**")) {
                        advance();
                        dict->add(parse_expression());
                    } else {
                        dict->add(parse_expression());
                        expect_op(":");
                        dict->add(parse_expression());
                    }
                    if (at_op(",")) advance();
                    else break;
                }
                expect_op("}");
                return dict;
            }
            NodePtr first = parse_expression();
            if (at_op(":")) {
                advance();
                auto dict = make(NodeType::DictExpr, first->start, first->end);
                dict->add(std::move(first));
                NodePtr value = parse_expression();
                if (at_kw("for") || at_kw("async")) {
                    dict->add(std::move(value));
                    auto comp = make(NodeType::Comprehension, dict->start, dict->end);
                    comp->children = std::move(dict->children);
                    while (at_kw("for") || at_kw("async")) {
                        if (at_kw("async")) advance();
                        expect_kw("for");
                        auto clause = make(NodeType::CompClause, cur().start, cur().end);
                        clause->add(parse_comp_target_list());
                        expect_kw("in");
                        clause->add(parse_or());
                        while (at_kw("if")) {
                            advance();
                            clause->add(parse_or());
                        }
                        comp->add(std::move(clause));
                    }
                    expect_op("}");
                    return comp;
                }
                dict->add(std::move(value));
                while (at_op(",")) {
                    advance();
                    if (at_op("}")) break;
                    dict->add(parse_expression());
                    expect_op(":");
                    dict->add(parse_expression());
                }
                expect_op("}");
                return dict;
            }
            if (at_kw("for") || at_kw("async")) {
                NodePtr comp = parse_comp_tail(std::move(first), NodeType::Comprehension);
                expect_op("}");
                return comp;
            }
            auto set = make(NodeType::SetExpr, first->start, first->end);
            set->add(std::move(first));
            while (at_op(",")) {
                advance();
                if (at_op("}")) break;
                set->add(parse_expression());
            }
            expect_op("}");
            return set;
        }
        if (at_op("...")) {
            const PyToken& tok = advance();
            return make(NodeType::Num, tok.start, tok.end);
        }
        throw ParseFail{};
    }
};

}  // namespace

SyntaxTree parse_source(const std::string& source) {
    return Parser(lex_python(source)).run();
}

}  // namespace sparsecoder
