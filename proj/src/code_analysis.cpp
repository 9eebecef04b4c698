#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "sparsecoder/code_analysis.hpp"

namespace sparsecoder {

const char* to_string(IdentifierKind kind) {
    switch (kind) {
        case IdentifierKind::Library: return "library";
        case IdentifierKind::Class: return "class";
        case IdentifierKind::Function: return "function";
        case IdentifierKind::GlobalVariable: return "global_variable";
        case IdentifierKind::Parameter: return "parameter";
        case IdentifierKind::LocalVariable: return "local_variable";
        case IdentifierKind::Attribute: return "attribute";
        case IdentifierKind::Other: return "other";
    }
    return "other";
}

namespace {

enum class BindSort { Import, Class, Func, Var, Param };

struct Scope {
    enum Kind { Module, Function, ClassBody, Comprehension } kind = Module;
    Scope* parent = nullptr;
    std::unordered_map<std::string, BindSort> bindings;
    std::unordered_set<std::string> global_decls;
    std::unordered_set<std::string> nonlocal_decls;
};

/// Two-pass scope analysis: pass 1 collects every binding per scope (a name
/// is local if bound anywhere in the scope), pass 2 classifies occurrences
/// against the finished scope tree.
class ScopeAnalyzer {
  public:
    explicit ScopeAnalyzer(const AnalyzerOptions& options) : options_(options) {}

    std::vector<IdentifierOccurrence> run(const SyntaxNode* module) {
        module_scope_ = new_scope(Scope::Module, nullptr);
        collect(module, module_scope_);
        classify(module, module_scope_);
        std::sort(occurrences_.begin(), occurrences_.end(),
                  [](const IdentifierOccurrence& a, const IdentifierOccurrence& b) {
                      return a.start < b.start;
                  });
        return std::move(occurrences_);
    }

  private:
    AnalyzerOptions options_;
    std::vector<std::unique_ptr<Scope>> scopes_;
    std::unordered_map<const SyntaxNode*, Scope*> node_scope_;
    Scope* module_scope_ = nullptr;
    std::vector<IdentifierOccurrence> occurrences_;

    Scope* new_scope(Scope::Kind kind, Scope* parent) {
        scopes_.push_back(std::make_unique<Scope>());
        scopes_.back()->kind = kind;
        scopes_.back()->parent = parent;
        return scopes_.back().get();
    }

    static void bind(Scope* s, const std::string& name, BindSort sort) {
        auto it = s->bindings.find(name);
        // Defs and imports outrank plain variable bindings for kind purposes.
        if (it == s->bindings.end() || it->second == BindSort::Var) s->bindings[name] = sort;
    }

    Scope* binding_target(Scope* s, const std::string& name) {
        if (s->global_decls.count(name)) return module_scope_;
        if (s->nonlocal_decls.count(name)) {
            for (Scope* p = s->parent; p; p = p->parent)
                if (p->kind == Scope::Function && p->bindings.count(name)) return p;
            return s;
        }
        return s;
    }

    // ---------------- pass 1: collect bindings ----------------

    void bind_target_expr(const SyntaxNode* t, Scope* s) {
        switch (t->type) {
            case NodeType::Name:
                bind(binding_target(s, t->text), t->text, BindSort::Var);
                break;
            case NodeType::TupleExpr:
            case NodeType::ListExpr:
                for (const auto& c : t->children) bind_target_expr(c.get(), s);
                break;
            case NodeType::Starred:
                if (!t->children.empty()) bind_target_expr(t->children[0].get(), s);
                break;
            default:
                break;  // attribute/subscript targets bind nothing
        }
    }

    void collect(const SyntaxNode* node, Scope* s) {
        switch (node->type) {
            case NodeType::FunctionDef: {
                bind(binding_target(s, node->text), node->text, BindSort::Func);
                Scope* fn = new_scope(Scope::Function, s);
                node_scope_[node] = fn;
                const size_t first = static_cast<size_t>(node->aux) + 1;  // skip decorators + name
                for (size_t i = 0; i < node->children.size(); ++i) {
                    const SyntaxNode* c = node->children[i].get();
                    if (i < static_cast<size_t>(node->aux)) {
                        collect(c, s);  // decorators in enclosing scope
                    } else if (c->type == NodeType::Param) {
                        bind(fn, c->text, BindSort::Param);
                        for (const auto& d : c->children) collect(d.get(), s);  // defaults/annotations
                    } else if (c->type == NodeType::Suite) {
                        collect_suite(c, fn);
                    } else if (i >= first) {
                        collect(c, s);  // return annotation
                    }
                }
                break;
            }
            case NodeType::Lambda: {
                Scope* fn = new_scope(Scope::Function, s);
                node_scope_[node] = fn;
                for (const auto& c : node->children) {
                    if (c->type == NodeType::Param) {
                        bind(fn, c->text, BindSort::Param);
                        for (const auto& d : c->children) collect(d.get(), s);
                    } else {
                        collect(c.get(), fn);
                    }
                }
                break;
            }
            case NodeType::ClassDef: {
                bind(binding_target(s, node->text), node->text, BindSort::Class);
                Scope* cls = new_scope(Scope::ClassBody, s);
                node_scope_[node] = cls;
                for (size_t i = 0; i < node->children.size(); ++i) {
                    const SyntaxNode* c = node->children[i].get();
                    if (c->type == NodeType::Suite) collect_suite(c, cls);
                    else collect(c, s);  // decorators, bases, keywords
                }
                break;
            }
            case NodeType::Import:
                for (const auto& item : node->children) {
                    // (root, path components..., alias?) — binds alias when
                    // present, otherwise the path root.
                    const SyntaxNode* last = item->children.back().get();
                    const bool has_alias = item->children.size() > 1 && last->type == NodeType::Name;
                    bind(binding_target(s, has_alias ? last->text : item->children[0]->text),
                         has_alias ? last->text : item->children[0]->text, BindSort::Import);
                }
                break;
            case NodeType::ImportFrom:
                for (const auto& item : node->children) {
                    if (item->type != NodeType::ListExpr) continue;  // skip module path
                    const SyntaxNode* bound = item->children.back().get();
                    bind(binding_target(s, bound->text), bound->text, BindSort::Import);
                }
                break;
            case NodeType::Assign: {
                for (size_t i = 0; i + 1 < node->children.size(); ++i)
                    bind_target_expr(node->children[i].get(), s);
                for (const auto& c : node->children) collect(c.get(), s);
                break;
            }
            case NodeType::AugAssign:
            case NodeType::AnnAssign: {
                bind_target_expr(node->children[0].get(), s);
                for (const auto& c : node->children) collect(c.get(), s);
                break;
            }
            case NodeType::For: {
                bind_target_expr(node->children[0].get(), s);
                for (const auto& c : node->children) collect(c.get(), s);
                break;
            }
            case NodeType::With: {
                for (const auto& item : node->children) {
                    if (item->type == NodeType::TupleExpr && item->children.size() == 2)
                        bind_target_expr(item->children[1].get(), s);
                }
                for (const auto& c : node->children) collect(c.get(), s);
                break;
            }
            case NodeType::Try: {
                for (const auto& c : node->children) {
                    if (c->type == NodeType::TupleExpr && c->children.size() == 3)
                        bind(binding_target(s, c->children[1]->text), c->children[1]->text,
                             BindSort::Var);
                    collect(c.get(), s);
                }
                break;
            }
            case NodeType::Global:
                for (const auto& c : node->children) {
                    s->global_decls.insert(c->text);
                    // Ensure the module binding exists so uses resolve.
                    if (!module_scope_->bindings.count(c->text))
                        module_scope_->bindings[c->text] = BindSort::Var;
                }
                break;
            case NodeType::Nonlocal:
                for (const auto& c : node->children) s->nonlocal_decls.insert(c->text);
                break;
            case NodeType::NamedExpr: {
                // A walrus inside a comprehension binds in the enclosing scope.
                Scope* t = s;
                while (t->kind == Scope::Comprehension && t->parent) t = t->parent;
                bind(binding_target(t, node->children[0]->text), node->children[0]->text,
                     BindSort::Var);
                collect(node->children[1].get(), s);
                break;
            }
            case NodeType::Comprehension: {
                Scope* comp = new_scope(Scope::Comprehension, s);
                node_scope_[node] = comp;
                bool first_clause = true;
                for (const auto& c : node->children) {
                    if (c->type == NodeType::CompClause) {
                        bind_target_expr(c->children[0].get(), comp);
                        collect(c->children[1].get(), first_clause ? s : comp);
                        for (size_t k = 2; k < c->children.size(); ++k)
                            collect(c->children[k].get(), comp);
                        first_clause = false;
                    } else {
                        collect(c.get(), comp);  // element expression(s)
                    }
                }
                break;
            }
            default:
                for (const auto& c : node->children) collect(c.get(), s);
                break;
        }
    }

    void collect_suite(const SyntaxNode* suite, Scope* s) {
        for (const auto& c : suite->children) collect(c.get(), s);
    }

    // ---------------- pass 2: classify occurrences ----------------

    void emit(const SyntaxNode* node, const std::string& name, IdentifierKind kind) {
        if (!options_.include_self_cls && kind == IdentifierKind::Parameter &&
            (name == "self" || name == "cls"))
            return;
        IdentifierOccurrence occ;
        occ.name = name;
        occ.start = node->start;
        occ.end = node->end;
        occ.kind = kind;
        occ.is_global = kind == IdentifierKind::Library || kind == IdentifierKind::Class ||
                        kind == IdentifierKind::Function || kind == IdentifierKind::GlobalVariable;
        occurrences_.push_back(std::move(occ));
    }

    IdentifierKind kind_of(Scope* where, BindSort sort) {
        if (where == module_scope_) {
            switch (sort) {
                case BindSort::Import: return IdentifierKind::Library;
                case BindSort::Class: return IdentifierKind::Class;
                case BindSort::Func: return IdentifierKind::Function;
                default: return IdentifierKind::GlobalVariable;
            }
        }
        return sort == BindSort::Param ? IdentifierKind::Parameter : IdentifierKind::LocalVariable;
    }

    IdentifierKind resolve(Scope* s, const std::string& name) {
        if (s->global_decls.count(name)) {
            auto it = module_scope_->bindings.find(name);
            return kind_of(module_scope_,
                           it == module_scope_->bindings.end() ? BindSort::Var : it->second);
        }
        bool first = true;
        for (Scope* p = s; p; p = p->parent) {
            // Class scopes are invisible to nested scopes.
            if (!first && p->kind == Scope::ClassBody) continue;
            auto it = p->bindings.find(name);
            if (it != p->bindings.end()) return kind_of(p, it->second);
            first = false;
        }
        return IdentifierKind::Other;
    }

    void classify_name(const SyntaxNode* node, Scope* s) { emit(node, node->text, resolve(s, node->text)); }

    void classify(const SyntaxNode* node, Scope* s) {
        switch (node->type) {
            case NodeType::Name:
                classify_name(node, s);
                break;
            case NodeType::Attribute:
                if (node->children.empty()) {
                    emit(node, node->text, IdentifierKind::Attribute);  // import path component
                } else {
                    classify(node->children[0].get(), s);
                    emit(node->children[1].get(), node->text, IdentifierKind::Attribute);
                }
                break;
            case NodeType::Keyword:
                emit(node, node->text, IdentifierKind::Other);
                for (const auto& c : node->children) classify(c.get(), s);
                break;
            case NodeType::FunctionDef: {
                Scope* fn = node_scope_.at(node);
                for (size_t i = 0; i < node->children.size(); ++i) {
                    const SyntaxNode* c = node->children[i].get();
                    if (i < static_cast<size_t>(node->aux)) {
                        classify(c, s);
                    } else if (c->type == NodeType::Name && i == static_cast<size_t>(node->aux)) {
                        classify_name(c, s);  // def name resolves in enclosing scope
                    } else if (c->type == NodeType::Param) {
                        emit(c, c->text, IdentifierKind::Parameter);
                        for (const auto& d : c->children) classify(d.get(), s);
                    } else if (c->type == NodeType::Suite) {
                        classify(c, fn);
                    } else {
                        classify(c, s);  // return annotation
                    }
                }
                break;
            }
            case NodeType::Lambda: {
                Scope* fn = node_scope_.at(node);
                for (const auto& c : node->children) {
                    if (c->type == NodeType::Param) {
                        emit(c.get(), c->text, IdentifierKind::Parameter);
                        for (const auto& d : c->children) classify(d.get(), s);
                    } else {
                        classify(c.get(), fn);
                    }
                }
                break;
            }
            case NodeType::ClassDef: {
                Scope* cls = node_scope_.at(node);
                for (size_t i = 0; i < node->children.size(); ++i) {
                    const SyntaxNode* c = node->children[i].get();
                    if (c->type == NodeType::Name && i == static_cast<size_t>(node->aux)) {
                        classify_name(c, s);
                    } else if (c->type == NodeType::Suite) {
                        classify(c, cls);
                    } else {
                        classify(c, s);
                    }
                }
                break;
            }
            case NodeType::Import:
                for (const auto& item : node->children) {
                    // Root and alias carry the binding kind; path components
                    // are attribute members.
                    const SyntaxNode* last = item->children.back().get();
                    const bool has_alias = item->children.size() > 1 && last->type == NodeType::Name;
                    const std::string& bound = has_alias ? last->text : item->children[0]->text;
                    const IdentifierKind kind = resolve(s, bound);
                    for (const auto& part : item->children) {
                        if (part->type == NodeType::Name) emit(part.get(), part->text, kind);
                        else emit(part.get(), part->text, IdentifierKind::Attribute);
                    }
                }
                break;
            case NodeType::ImportFrom:
                for (const auto& item : node->children) {
                    if (item->type == NodeType::TupleExpr) {  // module path
                        const IdentifierKind root_kind =
                            s == module_scope_ ? IdentifierKind::Library : IdentifierKind::LocalVariable;
                        for (size_t k = 0; k < item->children.size(); ++k) {
                            const SyntaxNode* part = item->children[k].get();
                            emit(part, part->text,
                                 k == 0 ? root_kind : IdentifierKind::Attribute);
                        }
                    } else {
                        const IdentifierKind kind = resolve(s, item->children.back()->text);
                        for (const auto& part : item->children) emit(part.get(), part->text, kind);
                    }
                }
                break;
            case NodeType::Try:
                for (const auto& c : node->children) {
                    if (c->type == NodeType::TupleExpr && c->children.size() == 3) {
                        classify(c->children[0].get(), s);
                        classify_name(c->children[1].get(), s);
                        classify(c->children[2].get(), s);
                    } else {
                        classify(c.get(), s);
                    }
                }
                break;
            case NodeType::Comprehension: {
                Scope* comp = node_scope_.at(node);
                bool first_clause = true;
                for (const auto& c : node->children) {
                    if (c->type == NodeType::CompClause) {
                        classify(c->children[0].get(), comp);
                        classify(c->children[1].get(), first_clause ? s : comp);
                        for (size_t k = 2; k < c->children.size(); ++k)
                            classify(c->children[k].get(), comp);
                        first_clause = false;
                    } else {
                        classify(c.get(), comp);
                    }
                }
                break;
            }
            default:
                for (const auto& c : node->children) classify(c.get(), s);
                break;
        }
    }
};

}  // namespace

IdentifierAnalysis extract_identifiers(const SyntaxTree& tree, const std::string& source,
                                       const AnalyzerOptions& options) {
    IdentifierAnalysis out;
    out.source_digest = hex64(fnv1a64(source));
    out.parse_ok = tree.parse_ok;
    if (!tree.parse_ok || !tree.root) return out;
    out.occurrences = ScopeAnalyzer(options).run(tree.root.get());
    return out;
}

IdentifierAnalysis analyze_source(const std::string& source, const AnalyzerOptions& options) {
    return extract_identifiers(parse_source(source), source, options);
}

}  // namespace sparsecoder
