#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codeine/domain.hpp"
#include "codeine/error.hpp"

namespace codeine {

// ── Program model ───────────────────────────────────────────────────────────

struct ConstraintTerm {
    enum class Kind { eq, eqc, neq, neq_offset, lt, leq, element, alldifferent, disj };

    Kind kind = Kind::eq;
    std::vector<int> vars;              // program variable indices, argument order
    std::int64_t constant = 0;          // eqc value, neq_offset offset
    std::vector<std::int64_t> table;    // element list (1-based on the index side)
    std::vector<ConstraintTerm> branches;  // disj alternatives, in order

    friend bool operator==(const ConstraintTerm&, const ConstraintTerm&) = default;
};

struct VariableDecl {
    std::string name;
    FiniteDomain domain;
    /// Names starting with '_' are anonymous.
    bool named = true;
};

struct ConstraintDecl {
    std::optional<std::string> name;
    ConstraintTerm term;
};

enum class VarOrder { leftmost, first_fail };
enum class ValueOrder { up, down };

struct Labeling {
    std::vector<int> vars;
    VarOrder var_order = VarOrder::leftmost;
    ValueOrder value_order = ValueOrder::up;
};

/// A `var` or `constraint` statement, in source order.
struct Statement {
    enum class Kind { declare, post } kind;
    std::size_t index;  // into Program::variables or Program::constraints
};

struct Program {
    std::vector<VariableDecl> variables;
    std::vector<ConstraintDecl> constraints;
    std::vector<Statement> statements;
    std::optional<Labeling> labeling;

    int variable_index(std::string_view name) const {
        for (std::size_t i = 0; i < variables.size(); ++i) {
            if (variables[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }
};

struct LoadOptions {
    /// Upper bound of the domain given to `var X;` declarations.
    std::int64_t default_max = kDefaultMaxValue;
};

/// Default domain bound: CODEINE_MAX_FD when set to a positive integer,
/// otherwise 268435455.
inline std::int64_t default_max_from_env() {
    if (const char* env = std::getenv("CODEINE_MAX_FD")) {
        std::int64_t v = 0;
        std::string_view s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec == std::errc() && ptr == s.data() + s.size() && v >= 0) return v;
    }
    return kDefaultMaxValue;
}

// ── .fd loader ──────────────────────────────────────────────────────────────

namespace detail {

class FdParser {
public:
    FdParser(std::string_view text, LoadOptions opts) : text_(text), opts_(opts) {}

    Program parse() {
        skip();
        while (pos_ < text_.size()) {
            statement();
            skip();
        }
        return std::move(prog_);
    }

private:
    [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }

    [[noreturn]] void fail_at(const std::string& what, std::size_t at) const {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i < at && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(what, at, line, col);
    }

    void skip() {
        for (;;) {
            while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ < text_.size() && text_[pos_] == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                continue;
            }
            return;
        }
    }

    bool peek(char c) {
        skip();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    bool peek_ident() {
        skip();
        return pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_');
    }

    std::string ident() {
        if (!peek_ident()) fail("expected identifier");
        std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        return std::string(text_.substr(start, pos_ - start));
    }

    std::int64_t integer() {
        skip();
        std::size_t start = pos_;
        if (pos_ < text_.size() && text_[pos_] == '-') ++pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc() || ptr != text_.data() + pos_ || pos_ == start) fail_at("expected integer", start);
        return v;
    }

    void statement() {
        std::size_t start = pos_;
        std::string kw = ident();
        if (prog_.labeling) fail_at("no statement may follow label(...)", start);
        if (kw == "var") {
            variable();
        } else if (kw == "constraint") {
            constraint();
        } else if (kw == "label") {
            labeling();
        } else {
            fail_at("unknown statement '" + kw + "'", start);
        }
        expect(';');
    }

    void check_fresh(const std::string& name, std::size_t at) {
        if (prog_.variable_index(name) >= 0) fail_at("duplicate name '" + name + "'", at);
        for (const auto& c : prog_.constraints) {
            if (c.name == name) fail_at("duplicate name '" + name + "'", at);
        }
    }

    void variable() {
        skip();
        std::size_t at = pos_;
        std::string name = ident();
        check_fresh(name, at);
        FiniteDomain dom = FiniteDomain::interval(0, opts_.default_max);
        if (peek_ident()) {
            std::size_t kw_at = pos_;
            if (ident() != "in") fail_at("expected 'in'", kw_at);
            if (peek('[')) {
                std::size_t open = pos_;
                std::size_t close = text_.find(']', open);
                if (close == std::string_view::npos) fail_at("unterminated domain", open);
                dom = parse_domain(text_.substr(open, close - open + 1), open);
                pos_ = close + 1;
            } else {
                std::int64_t lo = integer();
                skip();
                if (text_.substr(pos_, 2) != "..") fail("expected '..'");
                pos_ += 2;
                std::int64_t hi = integer();
                if (hi < lo) fail_at("empty domain " + std::to_string(lo) + ".." + std::to_string(hi), at);
                dom = FiniteDomain::interval(lo, hi);
            }
        }
        bool named = name[0] != '_';
        prog_.statements.push_back({Statement::Kind::declare, prog_.variables.size()});
        prog_.variables.push_back({std::move(name), std::move(dom), named});
    }

    int var_ref() {
        skip();
        std::size_t at = pos_;
        std::string name = ident();
        int idx = prog_.variable_index(name);
        if (idx < 0) fail_at("undeclared variable '" + name + "'", at);
        return idx;
    }

    std::vector<int> var_list() {
        expect('[');
        std::vector<int> out;
        if (peek(']')) {
            ++pos_;
            return out;
        }
        for (;;) {
            out.push_back(var_ref());
            if (peek(',')) {
                ++pos_;
                continue;
            }
            expect(']');
            return out;
        }
    }

    ConstraintTerm term() {
        skip();
        std::size_t at = pos_;
        std::string f = ident();
        ConstraintTerm t;
        expect('(');
        using K = ConstraintTerm::Kind;
        auto two_vars = [&](K k) {
            t.kind = k;
            t.vars.push_back(var_ref());
            expect(',');
            t.vars.push_back(var_ref());
        };
        if (f == "eq") {
            two_vars(K::eq);
        } else if (f == "neq") {
            two_vars(K::neq);
        } else if (f == "lt") {
            two_vars(K::lt);
        } else if (f == "leq") {
            two_vars(K::leq);
        } else if (f == "eqc") {
            t.kind = K::eqc;
            t.vars.push_back(var_ref());
            expect(',');
            t.constant = integer();
        } else if (f == "neq_offset") {
            two_vars(K::neq_offset);
            expect(',');
            t.constant = integer();
        } else if (f == "element") {
            t.kind = K::element;
            t.vars.push_back(var_ref());
            expect(',');
            expect('[');
            for (;;) {
                t.table.push_back(integer());
                if (peek(',')) {
                    ++pos_;
                    continue;
                }
                break;
            }
            expect(']');
            expect(',');
            t.vars.push_back(var_ref());
        } else if (f == "alldifferent") {
            t.kind = K::alldifferent;
            t.vars = var_list();
        } else if (f == "or") {
            t.kind = K::disj;
            t.branches.push_back(term());
            expect(',');
            t.branches.push_back(term());
        } else {
            fail_at("unknown constraint '" + f + "'", at);
        }
        expect(')');
        return t;
    }

    void constraint() {
        std::optional<std::string> name;
        // `constraint name: term` vs `constraint term(...)`: look ahead for ':'.
        skip();
        if (peek(':')) {
            ++pos_;
        } else {
            std::size_t save = pos_;
            std::size_t at = pos_;
            std::string first = ident();
            if (peek(':')) {
                ++pos_;
                check_fresh(first, at);
                name = std::move(first);
            } else {
                pos_ = save;
            }
        }
        ConstraintTerm t = term();
        prog_.statements.push_back({Statement::Kind::post, prog_.constraints.size()});
        prog_.constraints.push_back({std::move(name), std::move(t)});
    }

    void labeling() {
        expect('(');
        Labeling lab;
        lab.vars = var_list();
        expect(')');
        if (peek_ident()) {
            std::size_t at = pos_;
            if (ident() != "with") fail_at("expected 'with'", at);
            skip();
            at = pos_;
            std::string vo = ident();
            if (vo == "leftmost") {
                lab.var_order = VarOrder::leftmost;
            } else if (vo == "first_fail") {
                lab.var_order = VarOrder::first_fail;
            } else {
                fail_at("unknown variable strategy '" + vo + "'", at);
            }
            expect(',');
            skip();
            at = pos_;
            std::string va = ident();
            if (va == "up") {
                lab.value_order = ValueOrder::up;
            } else if (va == "down") {
                lab.value_order = ValueOrder::down;
            } else {
                fail_at("unknown value strategy '" + va + "'", at);
            }
        }
        prog_.labeling = std::move(lab);
    }

    std::string_view text_;
    LoadOptions opts_;
    std::size_t pos_ = 0;
    Program prog_;
};

}  // namespace detail

/// Parses a `.fd` program. Throws ParseError with line/column.
inline Program load_program(std::string_view text, LoadOptions opts = {}) {
    return detail::FdParser(text, opts).parse();
}

}  // namespace codeine
