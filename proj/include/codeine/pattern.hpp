#pragma once

// Event patterns: `label: when <formula> do|do_synchro <action>, ...`.
//
// Precedence is not > and > or, both binary operators left-associative.
// Aliases (cstrRep, cstr) and isNamed on identifiers are canonicalized at
// parse time, so formatting a parsed pattern and parsing it again yields a
// structurally equal AST.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "codeine/attribute_value.hpp"
#include "codeine/domain.hpp"
#include "codeine/error.hpp"
#include "codeine/port.hpp"

namespace codeine {

// ── AST ─────────────────────────────────────────────────────────────────────

enum class CompareOp : std::uint8_t { lt, gt, eq, ne, ge, le, in, notin, contains, notcontains };

constexpr std::string_view to_string(CompareOp op) noexcept {
    switch (op) {
        case CompareOp::lt: return "<";
        case CompareOp::gt: return ">";
        case CompareOp::eq: return "=";
        case CompareOp::ne: return "\\=";
        case CompareOp::ge: return ">=";
        case CompareOp::le: return "=<";
        case CompareOp::in: return "in";
        case CompareOp::notin: return "notin";
        case CompareOp::contains: return "contains";
        case CompareOp::notcontains: return "notcontains";
    }
    return "?";
}

/// Right-hand side of a comparison. Integer lists are stored as a domain.
using ConditionValue =
    std::variant<std::int64_t, std::string, Port, FiniteDomain, std::vector<std::string>, std::vector<Port>>;

struct Condition {
    enum class Kind : std::uint8_t { truth, compare, is_named };
    Kind kind = Kind::truth;
    Attribute attr = Attribute::chrono;
    CompareOp op = CompareOp::eq;
    ConditionValue value;

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    enum class Op : std::uint8_t { or_, and_, not_, cond };
    Op op = Op::cond;
    FormulaPtr lhs;  // or/and/not operand
    FormulaPtr rhs;  // or/and
    Condition cond;

    static FormulaPtr make_or(FormulaPtr a, FormulaPtr b) {
        return std::make_shared<const Formula>(Formula{Op::or_, std::move(a), std::move(b), {}});
    }
    static FormulaPtr make_and(FormulaPtr a, FormulaPtr b) {
        return std::make_shared<const Formula>(Formula{Op::and_, std::move(a), std::move(b), {}});
    }
    static FormulaPtr make_not(FormulaPtr a) {
        return std::make_shared<const Formula>(Formula{Op::not_, std::move(a), nullptr, {}});
    }
    static FormulaPtr make_cond(Condition c) {
        return std::make_shared<const Formula>(Formula{Op::cond, nullptr, nullptr, std::move(c)});
    }
    static FormulaPtr make_true() { return make_cond(Condition{}); }

    friend bool operator==(const Formula& a, const Formula& b) {
        if (a.op != b.op) return false;
        switch (a.op) {
            case Op::cond: return a.cond == b.cond;
            case Op::not_: return *a.lhs == *b.lhs;
            default: return *a.lhs == *b.lhs && *a.rhs == *b.rhs;
        }
    }
};

struct CurrentItem {
    Attribute attr;
    std::optional<std::string> binding;
    friend bool operator==(const CurrentItem&, const CurrentItem&) = default;
};

struct Action {
    enum class Kind : std::uint8_t { current, call };
    Kind kind = Kind::current;
    std::vector<CurrentItem> items;  // current
    std::string procedure;           // call
    std::vector<std::string> args;   // call: variable names bound by current items
    friend bool operator==(const Action&, const Action&) = default;
};

struct Pattern {
    std::string label;
    FormulaPtr formula;
    bool sync = false;
    std::vector<Action> actions;

    /// Union of the attributes named in current(...) actions.
    AttributeSet collected() const {
        AttributeSet s;
        for (const auto& a : actions) {
            for (const auto& it : a.items) s.insert(it.attr);
        }
        return s;
    }

    /// Variable name -> attribute, over all current(...) bindings.
    std::vector<std::pair<std::string, Attribute>> bindings() const {
        std::vector<std::pair<std::string, Attribute>> out;
        for (const auto& a : actions) {
            for (const auto& it : a.items) {
                if (it.binding) out.emplace_back(*it.binding, it.attr);
            }
        }
        return out;
    }

    friend bool operator==(const Pattern& a, const Pattern& b) {
        return a.label == b.label && a.sync == b.sync && a.actions == b.actions && *a.formula == *b.formula;
    }
};

// ── Lexer ───────────────────────────────────────────────────────────────────

namespace detail {

struct Token {
    enum class Kind : std::uint8_t { ident, integer, string, punct, end };
    Kind kind = Kind::end;
    std::string text;  // identifier, punctuation, or decoded string
    std::int64_t number = 0;
    std::size_t pos = 0;
};

inline std::vector<Token> lex_pattern(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token t;
        t.pos = i;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = i;
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
            t.kind = Token::Kind::ident;
            t.text = std::string(s.substr(start, i - start));
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t start = i;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            t.kind = Token::Kind::integer;
            auto [ptr, ec] = std::from_chars(s.data() + start, s.data() + i, t.number);
            if (ec != std::errc()) throw ParseError("integer out of range", start);
            t.text = std::string(s.substr(start, i - start));
        } else if (c == '\'') {
            ++i;
            t.kind = Token::Kind::string;
            for (;;) {
                if (i >= s.size()) throw ParseError("unterminated string", t.pos);
                if (s[i] == '\\' && i + 1 < s.size()) {
                    t.text += s[i + 1];
                    i += 2;
                    continue;
                }
                if (s[i] == '\'') {
                    ++i;
                    break;
                }
                t.text += s[i++];
            }
        } else {
            t.kind = Token::Kind::punct;
            auto two = s.substr(i, 2);
            if (two == "\\=" || two == ">=" || two == "=<") {
                t.text = std::string(two);
                i += 2;
            } else if (std::string_view("():,[]=<>-").find(c) != std::string_view::npos) {
                t.text = std::string(1, c);
                ++i;
            } else {
                throw ParseError(std::string("unexpected character '") + c + "'", i);
            }
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.pos = s.size();
    out.push_back(end);
    return out;
}

inline bool is_keyword(std::string_view w) {
    static constexpr std::array<std::string_view, 15> kw = {
        "when", "do", "do_synchro", "dosynchro", "and", "or", "not", "true",
        "in", "notin", "contains", "notcontains", "isNamed", "current", "call"};
    return std::find(kw.begin(), kw.end(), w) != kw.end();
}

inline bool is_label(std::string_view w) {
    if (w.empty() || !(std::isalpha(static_cast<unsigned char>(w[0])) || w[0] == '_')) return false;
    return std::all_of(w.begin(), w.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline bool is_variable_name(std::string_view w) {
    return !w.empty() && (std::isupper(static_cast<unsigned char>(w[0])) || w[0] == '_');
}

// ── Parser ──────────────────────────────────────────────────────────────────

class PatternParser {
public:
    explicit PatternParser(std::string_view text) : text_(text), toks_(lex_pattern(text)) {}

    Pattern pattern() {
        Pattern p;
        const Token& label = next();
        if (label.kind != Token::Kind::ident || is_keyword(label.text)) fail_at("expected pattern label", label.pos);
        p.label = label.text;
        expect_punct(":");
        expect_word("when");
        p.formula = or_expr();
        const Token& sync = next();
        if (sync.kind == Token::Kind::ident && sync.text == "do") {
            p.sync = false;
        } else if (sync.kind == Token::Kind::ident && (sync.text == "do_synchro" || sync.text == "dosynchro")) {
            p.sync = true;
        } else {
            fail_at("expected 'do' or 'do_synchro'", sync.pos);
        }
        p.actions.push_back(action());
        while (peek_punct(",")) {
            ++i_;
            p.actions.push_back(action());
        }
        if (peek().kind != Token::Kind::end) fail_at("unexpected trailing input", peek().pos);
        check_bindings(p);
        return p;
    }

private:
    [[noreturn]] void fail_at(const std::string& what, std::size_t pos) const {
        std::string near;
        if (pos < text_.size()) near = " near '" + std::string(text_.substr(pos, 12)) + "'";
        throw ParseError(what + near, pos);
    }

    const Token& peek() const { return toks_[i_]; }
    const Token& next() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

    bool peek_punct(std::string_view p) const { return peek().kind == Token::Kind::punct && peek().text == p; }
    bool peek_word(std::string_view w) const { return peek().kind == Token::Kind::ident && peek().text == w; }

    void expect_punct(std::string_view p) {
        if (!peek_punct(p)) fail_at("expected '" + std::string(p) + "'", peek().pos);
        ++i_;
    }
    void expect_word(std::string_view w) {
        if (!peek_word(w)) fail_at("expected '" + std::string(w) + "'", peek().pos);
        ++i_;
    }

    FormulaPtr or_expr() {
        FormulaPtr f = and_expr();
        while (peek_word("or")) {
            ++i_;
            f = Formula::make_or(std::move(f), and_expr());
        }
        return f;
    }

    FormulaPtr and_expr() {
        FormulaPtr f = unary();
        while (peek_word("and")) {
            ++i_;
            f = Formula::make_and(std::move(f), unary());
        }
        return f;
    }

    FormulaPtr unary() {
        if (peek_word("not")) {
            ++i_;
            return Formula::make_not(unary());
        }
        if (peek_punct("(")) {
            ++i_;
            FormulaPtr f = or_expr();
            expect_punct(")");
            return f;
        }
        return Formula::make_cond(condition());
    }

    Attribute attribute() {
        const Token& t = next();
        if (t.kind != Token::Kind::ident) fail_at("expected attribute name", t.pos);
        auto a = attribute_from_name(t.text);
        if (!a) fail_at("unknown attribute '" + t.text + "'", t.pos);
        return *a;
    }

    Condition condition() {
        Condition c;
        if (peek_word("true")) {
            ++i_;
            return c;
        }
        if (peek_word("isNamed")) {
            std::size_t at = peek().pos;
            ++i_;
            expect_punct("(");
            Attribute a = attribute();
            expect_punct(")");
            c.kind = Condition::Kind::is_named;
            switch (a) {
                case Attribute::vident:
                case Attribute::vname: c.attr = Attribute::vname; break;
                case Attribute::cident:
                case Attribute::cname: c.attr = Attribute::cname; break;
                default:
                    (void)at;
                    throw TypeError("isNamed applies to vident, vname, cident or cname, not '" +
                                    std::string(to_string(a)) + "'");
            }
            return c;
        }
        std::size_t at = peek().pos;
        c.kind = Condition::Kind::compare;
        c.attr = attribute();
        c.op = compare_op();
        c.value = value_for(c.attr, c.op, at);
        return c;
    }

    CompareOp compare_op() {
        const Token& t = next();
        if (t.kind == Token::Kind::punct) {
            if (t.text == "<") return CompareOp::lt;
            if (t.text == ">") return CompareOp::gt;
            if (t.text == "=") return CompareOp::eq;
            if (t.text == "\\=") return CompareOp::ne;
            if (t.text == ">=") return CompareOp::ge;
            if (t.text == "=<") return CompareOp::le;
        } else if (t.kind == Token::Kind::ident) {
            if (t.text == "in") return CompareOp::in;
            if (t.text == "notin") return CompareOp::notin;
            if (t.text == "contains") return CompareOp::contains;
            if (t.text == "notcontains") return CompareOp::notcontains;
        }
        fail_at("expected comparison operator", t.pos);
    }

    std::int64_t integer() {
        bool neg = false;
        if (peek_punct("-")) {
            neg = true;
            ++i_;
        }
        const Token& t = next();
        if (t.kind != Token::Kind::integer) fail_at("expected integer", t.pos);
        return neg ? -t.number : t.number;
    }

    bool peek_integer() const {
        return peek().kind == Token::Kind::integer ||
               (peek_punct("-") && toks_[i_ + 1].kind == Token::Kind::integer);
    }

    // Scalar string: quoted string, bare identifier or integer literal.
    std::string string_scalar() {
        const Token& t = next();
        if (t.kind == Token::Kind::string || t.kind == Token::Kind::ident || t.kind == Token::Kind::integer) {
            return t.text;
        }
        fail_at("expected string", t.pos);
    }

    Port port_scalar() {
        const Token& t = next();
        if (t.kind == Token::Kind::ident || t.kind == Token::Kind::string) {
            if (auto p = port_from_name(t.text)) return *p;
            throw TypeError("'" + t.text + "' is not a port");
        }
        if (t.kind == Token::Kind::integer) throw TypeError("port compared with an integer");
        fail_at("expected port name", t.pos);
    }

    template <class F>
    void list(F&& item) {
        expect_punct("[");
        if (peek_punct("]")) {
            ++i_;
            return;
        }
        for (;;) {
            item();
            if (peek_punct(",")) {
                ++i_;
                continue;
            }
            expect_punct("]");
            return;
        }
    }

    ConditionValue value_for(Attribute a, CompareOp op, std::size_t at) {
        auto op_name = std::string(to_string(op));
        auto attr_name = std::string(to_string(a));
        bool membership = op == CompareOp::in || op == CompareOp::notin;
        bool containment = op == CompareOp::contains || op == CompareOp::notcontains;
        bool equality = op == CompareOp::eq || op == CompareOp::ne;
        if (peek().kind == Token::Kind::end || (peek().kind == Token::Kind::ident && is_keyword(peek().text))) {
            fail_at("expected a value after '" + op_name + "'", peek().pos);
        }
        switch (kind_of(a)) {
            case AttributeKind::integer: {
                if (containment) throw TypeError("'" + op_name + "' needs a domain attribute, not '" + attr_name + "'");
                if (membership) {
                    std::vector<Range> ranges;
                    list([&] {
                        std::int64_t lo = integer();
                        std::int64_t hi = lo;
                        if (peek_punct("-")) {
                            ++i_;
                            hi = integer();
                            if (hi < lo) fail_at("reversed range in list", at);
                        }
                        ranges.push_back({lo, hi});
                    });
                    return FiniteDomain(std::move(ranges));
                }
                if (!peek_integer()) {
                    if (peek().kind == Token::Kind::punct || peek().kind == Token::Kind::end) {
                        fail_at("expected integer", peek().pos);
                    }
                    throw TypeError("'" + attr_name + "' compared with a non-integer");
                }
                return integer();
            }
            case AttributeKind::port: {
                if (membership) {
                    std::vector<Port> ports;
                    list([&] { ports.push_back(port_scalar()); });
                    return ports;
                }
                if (!equality) throw TypeError("'" + op_name + "' is not defined on port");
                return port_scalar();
            }
            case AttributeKind::string: {
                if (membership) {
                    std::vector<std::string> items;
                    list([&] { items.push_back(string_scalar()); });
                    return items;
                }
                if (!equality) throw TypeError("'" + op_name + "' is not defined on string attribute '" + attr_name + "'");
                return string_scalar();
            }
            case AttributeKind::domain: {
                if (!containment) {
                    throw TypeError("'" + op_name + "' is not defined on domain attribute '" + attr_name +
                                    "'; use contains/notcontains");
                }
                if (!peek_integer()) throw TypeError("'" + op_name + "' needs an integer right-hand side");
                return integer();
            }
            case AttributeKind::list:
                throw TypeError("'" + attr_name + "' can be collected but not tested");
        }
        fail_at("bad condition", at);
    }

    Action action() {
        Action act;
        const Token& head = next();
        if (head.kind != Token::Kind::ident) fail_at("expected action", head.pos);
        if (head.text == "current") {
            act.kind = Action::Kind::current;
            expect_punct("(");
            if (!peek_punct(")")) {
                for (;;) {
                    CurrentItem it{attribute(), std::nullopt};
                    if (peek_punct("=")) {
                        ++i_;
                        const Token& v = next();
                        if (v.kind != Token::Kind::ident || !is_variable_name(v.text)) {
                            fail_at("expected variable name", v.pos);
                        }
                        it.binding = v.text;
                    }
                    act.items.push_back(std::move(it));
                    if (peek_punct(",") || peek_word("and")) {
                        ++i_;
                        continue;
                    }
                    break;
                }
            }
            expect_punct(")");
            return act;
        }
        act.kind = Action::Kind::call;
        if (head.text == "call") {
            if (peek_punct("(")) {
                ++i_;
                act.procedure = procedure_name();
                if (peek_punct("(")) act.args = call_args();
                expect_punct(")");
                return act;
            }
            act.procedure = procedure_name();
        } else {
            if (is_keyword(head.text)) fail_at("expected action", head.pos);
            act.procedure = head.text;
        }
        if (peek_punct("(")) {
            act.args = call_args();
        } else if (head.text != "call") {
            fail_at("expected '(' after procedure name", peek().pos);
        }
        return act;
    }

    std::string procedure_name() {
        const Token& t = next();
        if (t.kind != Token::Kind::ident || is_keyword(t.text)) fail_at("expected procedure name", t.pos);
        return t.text;
    }

    std::vector<std::string> call_args() {
        expect_punct("(");
        std::vector<std::string> args;
        if (peek_word("void")) {
            ++i_;
            expect_punct(")");
            return args;
        }
        if (peek_punct(")")) {
            ++i_;
            return args;
        }
        for (;;) {
            const Token& v = next();
            if (v.kind != Token::Kind::ident || !is_variable_name(v.text)) fail_at("expected variable name", v.pos);
            args.push_back(v.text);
            if (peek_punct(",")) {
                ++i_;
                continue;
            }
            expect_punct(")");
            return args;
        }
    }

    static void check_bindings(const Pattern& p) {
        auto bound = p.bindings();
        for (const auto& a : p.actions) {
            for (const auto& arg : a.args) {
                bool ok = std::any_of(bound.begin(), bound.end(), [&](const auto& b) { return b.first == arg; });
                if (!ok) throw ParseError("variable '" + arg + "' is not bound by current(...)", 0);
            }
        }
    }

    std::string_view text_;
    std::vector<Token> toks_;
    std::size_t i_ = 0;
};

}  // namespace detail

/// Parses one pattern. Throws ParseError (syntax) or TypeError (ill-typed
/// condition).
inline Pattern parse_pattern(std::string_view text) { return detail::PatternParser(text).pattern(); }

/// Splits a pattern file: patterns terminated by '.', '%' starts a comment.
/// A missing final '.' is tolerated.
inline std::vector<std::string> split_pattern_text(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            cur += c;
            if (c == '\\' && i + 1 < text.size()) {
                cur += text[++i];
            } else if (c == '\'') {
                quoted = false;
            }
            continue;
        }
        if (c == '\'') {
            quoted = true;
            cur += c;
        } else if (c == '%') {
            while (i < text.size() && text[i] != '\n') ++i;
            cur += '\n';
        } else if (c == '.') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    std::vector<std::string> trimmed;
    for (auto& s : out) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        auto e = s.find_last_not_of(" \t\r\n");
        trimmed.push_back(s.substr(b, e - b + 1));
    }
    return trimmed;
}

inline std::vector<Pattern> parse_patterns(std::string_view text) {
    std::vector<Pattern> out;
    for (const auto& chunk : split_pattern_text(text)) out.push_back(parse_pattern(chunk));
    return out;
}

// ── Formatting ──────────────────────────────────────────────────────────────

namespace detail {

inline std::string quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    return out + "'";
}

inline std::string format_value(const ConditionValue& v) {
    struct V {
        std::string operator()(std::int64_t i) const { return std::to_string(i); }
        std::string operator()(const std::string& s) const { return quote(s); }
        std::string operator()(Port p) const { return std::string(to_string(p)); }
        std::string operator()(const FiniteDomain& d) const { return format_domain(d); }
        std::string operator()(const std::vector<std::string>& l) const {
            std::string out = "[";
            for (std::size_t i = 0; i < l.size(); ++i) out += (i ? "," : "") + quote(l[i]);
            return out + "]";
        }
        std::string operator()(const std::vector<Port>& l) const {
            std::string out = "[";
            for (std::size_t i = 0; i < l.size(); ++i) out += (i ? "," : "") + std::string(to_string(l[i]));
            return out + "]";
        }
    };
    return std::visit(V{}, v);
}

inline std::string format_condition(const Condition& c) {
    switch (c.kind) {
        case Condition::Kind::truth: return "true";
        case Condition::Kind::is_named: return "isNamed(" + std::string(to_string(c.attr)) + ")";
        case Condition::Kind::compare: {
            std::string op(to_string(c.op));
            bool word = std::isalpha(static_cast<unsigned char>(op[0]));
            return std::string(to_string(c.attr)) + (word ? " " + op + " " : op) + format_value(c.value);
        }
    }
    return {};
}

// Levels: 0 = or, 1 = and, 2 = unary.
inline std::string format_formula(const Formula& f, int level) {
    switch (f.op) {
        case Formula::Op::cond: return format_condition(f.cond);
        case Formula::Op::not_: return "not " + format_formula(*f.lhs, 2);
        case Formula::Op::and_: {
            std::string s = format_formula(*f.lhs, 1) + " and " + format_formula(*f.rhs, 2);
            return level > 1 ? "(" + s + ")" : s;
        }
        case Formula::Op::or_: {
            std::string s = format_formula(*f.lhs, 0) + " or " + format_formula(*f.rhs, 1);
            return level > 0 ? "(" + s + ")" : s;
        }
    }
    return {};
}

}  // namespace detail

inline std::string format_formula(const Formula& f) { return detail::format_formula(f, 0); }

inline std::string format_action(const Action& a) {
    if (a.kind == Action::Kind::current) {
        std::string out = "current(";
        for (std::size_t i = 0; i < a.items.size(); ++i) {
            if (i) out += ",";
            out += to_string(a.items[i].attr);
            if (a.items[i].binding) out += "=" + *a.items[i].binding;
        }
        return out + ")";
    }
    if (a.args.empty()) return "call(" + a.procedure + ")";
    std::string out = "call " + a.procedure + "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) out += (i ? "," : "") + a.args[i];
    return out + ")";
}

/// Single-line canonical text of a pattern.
inline std::string format_pattern(const Pattern& p) {
    std::string out = p.label + ": when " + format_formula(*p.formula) + (p.sync ? " do_synchro " : " do ");
    for (std::size_t i = 0; i < p.actions.size(); ++i) {
        if (i) out += ", ";
        out += format_action(p.actions[i]);
    }
    return out;
}

// ── Evaluation ──────────────────────────────────────────────────────────────

namespace detail {

inline void collect_attributes(const Formula& f, AttributeSet& out) {
    switch (f.op) {
        case Formula::Op::cond:
            if (f.cond.kind != Condition::Kind::truth) out.insert(f.cond.attr);
            return;
        case Formula::Op::not_: collect_attributes(*f.lhs, out); return;
        default:
            collect_attributes(*f.lhs, out);
            collect_attributes(*f.rhs, out);
    }
}

}  // namespace detail

/// Attributes referenced by `f`, cheapest first (ties in attribute order).
inline std::vector<Attribute> required_attributes(const Formula& f) {
    AttributeSet s;
    detail::collect_attributes(f, s);
    std::vector<Attribute> out;
    s.for_each([&](Attribute a) { out.push_back(a); });
    std::stable_sort(out.begin(), out.end(), [](Attribute a, Attribute b) { return cost_rank(a) < cost_rank(b); });
    return out;
}

/// Memoizing attribute lookup over any source exposing
/// `std::optional<AttributeValue> get(Attribute) const`. Each attribute is
/// fetched from the source at most once until `reset()`.
template <class Source>
class AttributeCache {
public:
    explicit AttributeCache(const Source& src) : src_(&src) {}

    void reset(const Source& src) {
        src_ = &src;
        fetched_ = 0;
    }

    /// nullptr when the attribute is absent.
    const AttributeValue* lookup(Attribute a) {
        auto i = static_cast<std::size_t>(a);
        std::uint32_t bit = 1u << i;
        if (!(fetched_ & bit)) {
            fetched_ |= bit;
            ++fetch_count_;
            slots_[i] = src_->get(a);
        }
        return slots_[i] ? &*slots_[i] : nullptr;
    }

    /// Attributes fetched since the last reset.
    AttributeSet fetched() const {
        AttributeSet s;
        for (std::size_t i = 0; i < kAttributeCount; ++i) {
            if (fetched_ & (1u << i)) s.insert(static_cast<Attribute>(i));
        }
        return s;
    }
    std::uint64_t fetch_count() const noexcept { return fetch_count_; }

private:
    const Source* src_;
    std::uint32_t fetched_ = 0;
    std::uint64_t fetch_count_ = 0;
    std::array<std::optional<AttributeValue>, kAttributeCount> slots_;
};

/// Elementary condition over a looked-up value; absent attributes make
/// every elementary condition false.
template <class Lookup>
bool eval_condition(const Condition& c, Lookup& lookup) {
    if (c.kind == Condition::Kind::truth) return true;
    const AttributeValue* v = lookup.lookup(c.attr);
    if (c.kind == Condition::Kind::is_named) return v != nullptr;
    if (!v) return false;
    switch (c.op) {
        case CompareOp::lt:
        case CompareOp::gt:
        case CompareOp::ge:
        case CompareOp::le: {
            if (!v->is_integer() || !std::holds_alternative<std::int64_t>(c.value)) return false;
            std::int64_t x = v->as_integer();
            std::int64_t k = std::get<std::int64_t>(c.value);
            if (c.op == CompareOp::lt) return x < k;
            if (c.op == CompareOp::gt) return x > k;
            if (c.op == CompareOp::ge) return x >= k;
            return x <= k;
        }
        case CompareOp::eq:
        case CompareOp::ne: {
            bool eq = false;
            if (v->is_integer() && std::holds_alternative<std::int64_t>(c.value)) {
                eq = v->as_integer() == std::get<std::int64_t>(c.value);
            } else if (v->is_port() && std::holds_alternative<Port>(c.value)) {
                eq = v->as_port() == std::get<Port>(c.value);
            } else if (v->is_string() && std::holds_alternative<std::string>(c.value)) {
                eq = v->as_string() == std::get<std::string>(c.value);
            } else {
                return false;
            }
            return c.op == CompareOp::eq ? eq : !eq;
        }
        case CompareOp::in:
        case CompareOp::notin: {
            bool member = false;
            if (v->is_integer() && std::holds_alternative<FiniteDomain>(c.value)) {
                member = std::get<FiniteDomain>(c.value).contains(v->as_integer());
            } else if (v->is_port() && std::holds_alternative<std::vector<Port>>(c.value)) {
                const auto& l = std::get<std::vector<Port>>(c.value);
                member = std::find(l.begin(), l.end(), v->as_port()) != l.end();
            } else if (v->is_string() && std::holds_alternative<std::vector<std::string>>(c.value)) {
                const auto& l = std::get<std::vector<std::string>>(c.value);
                member = std::find(l.begin(), l.end(), v->as_string()) != l.end();
            } else {
                return false;
            }
            return c.op == CompareOp::in ? member : !member;
        }
        case CompareOp::contains:
        case CompareOp::notcontains: {
            if (!v->is_domain() || !std::holds_alternative<std::int64_t>(c.value)) return false;
            bool has = v->as_domain().contains(std::get<std::int64_t>(c.value));
            return c.op == CompareOp::contains ? has : !has;
        }
    }
    return false;
}

/// Short-circuit boolean evaluation; `lookup` provides
/// `const AttributeValue* lookup(Attribute)`.
template <class Lookup>
bool eval_formula(const Formula& f, Lookup& lookup) {
    switch (f.op) {
        case Formula::Op::cond: return eval_condition(f.cond, lookup);
        case Formula::Op::not_: return !eval_formula(*f.lhs, lookup);
        case Formula::Op::and_: return eval_formula(*f.lhs, lookup) && eval_formula(*f.rhs, lookup);
        case Formula::Op::or_: return eval_formula(*f.lhs, lookup) || eval_formula(*f.rhs, lookup);
    }
    return false;
}

/// Convenience overload over any attribute source (TraceEvent, EventView...).
template <class Source>
bool evaluate(const Formula& f, const Source& src) {
    AttributeCache<Source> cache(src);
    return eval_formula(f, cache);
}

// ── Static port analysis ────────────────────────────────────────────────────

namespace detail {

enum class Tri : std::uint8_t { no, yes, unknown };

inline Tri tri_not(Tri t) { return t == Tri::unknown ? t : (t == Tri::yes ? Tri::no : Tri::yes); }

inline Tri eval_static(const Formula& f, Port p) {
    switch (f.op) {
        case Formula::Op::not_: return tri_not(eval_static(*f.lhs, p));
        case Formula::Op::and_: {
            Tri a = eval_static(*f.lhs, p);
            if (a == Tri::no) return Tri::no;
            Tri b = eval_static(*f.rhs, p);
            if (b == Tri::no) return Tri::no;
            return (a == Tri::yes && b == Tri::yes) ? Tri::yes : Tri::unknown;
        }
        case Formula::Op::or_: {
            Tri a = eval_static(*f.lhs, p);
            if (a == Tri::yes) return Tri::yes;
            Tri b = eval_static(*f.rhs, p);
            if (b == Tri::yes) return Tri::yes;
            return (a == Tri::no && b == Tri::no) ? Tri::no : Tri::unknown;
        }
        case Formula::Op::cond: {
            const Condition& c = f.cond;
            if (c.kind == Condition::Kind::truth) return Tri::yes;
            if ((ports_carrying(c.attr) & port_bit(p)) == 0) return Tri::no;
            if (c.kind != Condition::Kind::compare || c.attr != Attribute::port) return Tri::unknown;
            struct Probe {
                Port p;
                const AttributeValue* lookup(Attribute) {
                    v = AttributeValue(p);
                    return &v;
                }
                AttributeValue v;
            } probe{p, {}};
            return eval_condition(c, probe) ? Tri::yes : Tri::no;
        }
    }
    return Tri::unknown;
}

}  // namespace detail

/// Ports at which `f` is not statically false (port bound, every other
/// attribute unknown but known present/absent per port).
inline PortMask possible_ports(const Formula& f) {
    PortMask m = 0;
    for (std::size_t i = 0; i < kPortCount; ++i) {
        auto p = static_cast<Port>(i);
        if (detail::eval_static(f, p) != detail::Tri::no) m |= port_bit(p);
    }
    return m;
}

}  // namespace codeine
