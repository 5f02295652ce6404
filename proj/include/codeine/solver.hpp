#pragma once

// Deterministic finite-domain solver instrumented with the 15-port tracer.
//
// Execution model: statements run in source order; each posted constraint
// filters immediately and the propagation queue is run to fixpoint before
// the next statement. `or(a,b)` and labeling create choice points explored
// depth-first. Every observable step goes through `emit`, which hands a
// RawEvent plus a lazily-evaluated EventView to the sink.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "codeine/attribute_value.hpp"
#include "codeine/domain.hpp"
#include "codeine/port.hpp"
#include "codeine/program.hpp"
#include "codeine/trace_event.hpp"

namespace codeine {

/// Source of the `time` attribute: milliseconds since beginExec for the
/// event with the given chrono.
using Clock = std::function<std::int64_t(std::uint64_t chrono)>;

/// Wall clock measured from the first call.
inline Clock wall_clock() {
    auto start = std::make_shared<std::optional<std::chrono::steady_clock::time_point>>();
    return [start](std::uint64_t) -> std::int64_t {
        auto now = std::chrono::steady_clock::now();
        if (!*start) *start = now;
        return std::chrono::duration_cast<std::chrono::milliseconds>(now - **start).count();
    };
}

/// Reproducible clock: time = seed + chrono - 1.
inline Clock deterministic_clock(std::int64_t seed = 0) {
    return [seed](std::uint64_t chrono) { return seed + static_cast<std::int64_t>(chrono) - 1; };
}

enum class Flow { proceed, abort };

struct RunOptions {
    /// 0 means exhaustive search.
    std::uint64_t max_solutions = 0;
    Clock clock;  // wall_clock() when empty
};

using Assignment = std::vector<std::pair<std::string, FiniteDomain>>;

struct RunStats {
    std::uint64_t solutions = 0;
    std::uint64_t failures = 0;
    std::uint64_t events = 0;
    bool aborted = false;
    std::vector<Assignment> answers;  // one per solution event, program order
};

// ── Solver state ────────────────────────────────────────────────────────────

enum class Kernel : std::uint8_t { eq, eqc, neq_offset, lt, leq, element };

struct VariableState {
    std::int64_t id;  // vident = "v" + id
    const VariableDecl* decl;
    FiniteDomain dom;
    std::vector<int> watchers;  // constraint store indices, creation order
};

struct ConstraintState {
    std::int64_t id;  // cident = "c" + id
    const std::optional<std::string>* name;
    ConstraintTerm::Kind source;  // term kind as written (neq vs neq_offset, alldifferent)
    Kernel kernel;
    std::vector<int> vars;  // store indices, argument order (duplicates removed for watching)
    std::int64_t constant = 0;
    const std::vector<std::int64_t>* table = nullptr;
    bool active = true;
};

struct RawEvent {
    Port port;
    std::uint64_t chrono;
    std::int64_t depth;
    std::int64_t node;
    bool labeling;
    int var = -1;
    int cstr = -1;
    const FiniteDomain* before = nullptr;  // reduce only: domain before the event
};

class SolverState {
public:
    const std::vector<VariableState>& variables() const noexcept { return vars_; }
    const std::vector<ConstraintState>& constraints() const noexcept { return store_; }
    std::uint64_t chrono() const noexcept { return chrono_; }
    std::int64_t current_node() const noexcept { return node_; }
    std::int64_t current_depth() const noexcept { return depth_; }
    bool labeling_stage() const noexcept { return labeling_; }
    std::size_t queue_size() const noexcept { return queue_.size(); }

    /// Number of times a costly attribute (vdom, delta, cexternal,
    /// cinternal, named_vars, full_dom) was materialized.
    std::uint64_t costly_evaluations() const noexcept { return costly_; }

    std::string vident(int var) const { return "v" + std::to_string(vars_[var].id); }
    std::string cident(int c) const { return "c" + std::to_string(store_[c].id); }

    /// Source-level representation with variable identifiers, e.g.
    /// "element(v1,[2,5,7],v2)".
    std::string external(int c) const {
        const auto& k = store_[c];
        std::string out;
        auto v = [&](std::size_t i) { return vident(k.vars[i]); };
        switch (k.kernel) {
            case Kernel::eq: return "eq(" + v(0) + "," + v(1) + ")";
            case Kernel::eqc: return "eqc(" + v(0) + "," + std::to_string(k.constant) + ")";
            case Kernel::neq_offset:
                if (k.source == ConstraintTerm::Kind::neq_offset) {
                    return "neq_offset(" + v(0) + "," + v(1) + "," + std::to_string(k.constant) + ")";
                }
                return "neq(" + v(0) + "," + v(1) + ")";
            case Kernel::lt: return "lt(" + v(0) + "," + v(1) + ")";
            case Kernel::leq: return "leq(" + v(0) + "," + v(1) + ")";
            case Kernel::element: {
                out = "element(" + v(0) + ",[";
                for (std::size_t i = 0; i < k.table->size(); ++i) {
                    if (i) out += ',';
                    out += std::to_string((*k.table)[i]);
                }
                return out + "]," + v(1) + ")";
            }
        }
        return out;
    }

    /// Propagator-level representation, e.g. "x_neq_y_plus_c(v1,v2,3)".
    std::string internal(int c) const {
        const auto& k = store_[c];
        auto v = [&](std::size_t i) { return vident(k.vars[i]); };
        switch (k.kernel) {
            case Kernel::eq: return "x_eq_y(" + v(0) + "," + v(1) + ")";
            case Kernel::eqc: return "x_eq_c(" + v(0) + "," + std::to_string(k.constant) + ")";
            case Kernel::neq_offset:
                return "x_neq_y_plus_c(" + v(0) + "," + v(1) + "," + std::to_string(k.constant) + ")";
            case Kernel::lt: return "x_lt_y(" + v(0) + "," + v(1) + ")";
            case Kernel::leq: return "x_lte_y(" + v(0) + "," + v(1) + ")";
            case Kernel::element: return "element_table(" + v(0) + "," + std::to_string(k.table->size()) + "," + v(1) + ")";
        }
        return {};
    }

protected:
    friend class EventView;

    std::vector<VariableState> vars_;
    std::vector<ConstraintState> store_;
    std::deque<int> queue_;
    std::vector<char> in_queue_;
    std::uint64_t chrono_ = 0;
    std::int64_t node_ = 0;
    std::int64_t depth_ = 0;
    bool labeling_ = false;
    Clock clock_;
    mutable std::uint64_t costly_ = 0;
};

// ── EventView ───────────────────────────────────────────────────────────────
// Lazy accessor for the attributes of the event being emitted. Valid only
// during the sink call.

class EventView {
public:
    EventView(const SolverState& s, const RawEvent& e) : s_(&s), e_(&e) {}

    const RawEvent& raw() const noexcept { return *e_; }
    const SolverState& state() const noexcept { return *s_; }
    Port port() const noexcept { return e_->port; }
    std::uint64_t chrono() const noexcept { return e_->chrono; }

    bool has(Attribute a) const noexcept {
        if ((ports_carrying(a) & port_bit(e_->port)) == 0) return false;
        if (a == Attribute::vname) return s_->vars_[e_->var].decl->named;
        if (a == Attribute::cname) return s_->store_[e_->cstr].name->has_value();
        return true;
    }

    /// Attribute value, computed on demand; nullopt when absent on this event.
    std::optional<AttributeValue> get(Attribute a) const {
        if (!has(a)) return std::nullopt;
        const auto& e = *e_;
        switch (a) {
            case Attribute::chrono: return AttributeValue(static_cast<std::int64_t>(e.chrono));
            case Attribute::port: return AttributeValue(e.port);
            case Attribute::depth: return AttributeValue(e.depth);
            case Attribute::node: return AttributeValue(e.node);
            case Attribute::time: return AttributeValue(s_->clock_(e.chrono));
            case Attribute::stage: return AttributeValue(e.labeling ? "labeling" : "init");
            case Attribute::vident: return AttributeValue(s_->vident(e.var));
            case Attribute::vname: return AttributeValue(s_->vars_[e.var].decl->name);
            case Attribute::cident: return AttributeValue(s_->cident(e.cstr));
            case Attribute::cname: return AttributeValue(**s_->store_[e.cstr].name);
            case Attribute::cexternal: ++s_->costly_; return AttributeValue(s_->external(e.cstr));
            case Attribute::cinternal: ++s_->costly_; return AttributeValue(s_->internal(e.cstr));
            case Attribute::vdom: ++s_->costly_; return AttributeValue(s_->vars_[e.var].dom);
            case Attribute::delta: ++s_->costly_; return AttributeValue(e.before->difference(s_->vars_[e.var].dom));
            case Attribute::update: return AttributeValue(update_kind());
            case Attribute::named_vars: {
                ++s_->costly_;
                AttributeValue::List l;
                for (std::size_t i = 0; i < s_->vars_.size(); ++i) {
                    if (s_->vars_[i].decl->named) l.emplace_back(s_->vident(static_cast<int>(i)));
                }
                return AttributeValue(std::move(l));
            }
            case Attribute::full_dom: {
                ++s_->costly_;
                AttributeValue::List l;
                for (std::size_t i = 0; i < s_->vars_.size(); ++i) {
                    l.emplace_back(AttributeValue::List{s_->vident(static_cast<int>(i)), s_->vars_[i].dom});
                }
                return AttributeValue(std::move(l));
            }
        }
        return std::nullopt;
    }

    /// Integer-valued attributes without going through AttributeValue.
    std::int64_t integer(Attribute a) const {
        switch (a) {
            case Attribute::chrono: return static_cast<std::int64_t>(e_->chrono);
            case Attribute::depth: return e_->depth;
            case Attribute::node: return e_->node;
            case Attribute::time: return s_->clock_(e_->chrono);
            default: throw Error("attribute '" + std::string(to_string(a)) + "' is not an integer");
        }
    }

    /// Kind of bound update at a reduce: "val" when the domain became a
    /// singleton, "min"/"max" when only values below the new minimum / above
    /// the new maximum were withdrawn, "any" otherwise.
    std::string update_kind() const {
        const FiniteDomain& after = s_->vars_[e_->var].dom;
        const FiniteDomain& before = *e_->before;
        if (after.is_singleton()) return "val";
        bool interior_kept = before.restrict_to(after.min(), after.max()) == after;
        if (interior_kept && before.max() == after.max()) return "min";
        if (interior_kept && before.min() == after.min()) return "max";
        return "any";
    }

    /// Materializes the attributes in `attrs` that are present.
    TraceEvent materialize(AttributeSet attrs) const {
        TraceEvent t;
        t.port = e_->port;
        attrs.for_each([&](Attribute a) {
            if (auto v = get(a)) t.set(a, *v);
        });
        return t;
    }

    /// Every attribute present on this event except the whole-store dumps
    /// (named_vars, full_dom).
    AttributeSet default_attributes() const {
        AttributeSet s;
        for (std::size_t i = 0; i < kAttributeCount; ++i) {
            auto a = static_cast<Attribute>(i);
            if (a == Attribute::named_vars || a == Attribute::full_dom || a == Attribute::port) continue;
            if (has(a)) s.insert(a);
        }
        return s;
    }

private:
    const SolverState* s_;
    const RawEvent* e_;
};

// ── Engine ──────────────────────────────────────────────────────────────────

/// Sink that discards every event (untraced execution).
struct NoTrace {
    Flow operator()(const EventView&) const noexcept { return Flow::proceed; }
};

template <class Sink>
class Engine : public SolverState {
public:
    Engine(const Program& prog, Sink& sink, RunOptions opts) : prog_(prog), sink_(sink), opts_(std::move(opts)) {
        clock_ = opts_.clock ? opts_.clock : wall_clock();
    }

    RunStats run() {
        emit(Port::beginExec);
        execute();
        // endExec is emitted even after an abort; the sink's answer is moot.
        bool was_aborted = aborted_;
        aborted_ = false;
        emit(Port::endExec);
        stats_.aborted = was_aborted;
        stats_.events = chrono_;
        return std::move(stats_);
    }

private:
    struct TrailEntry {
        int var;     // -1: constraint reactivation entry
        int cstr;
        FiniteDomain old;
    };

    struct Choice {
        std::int64_t id;
        std::int64_t depth;
        std::size_t trail_mark;
        std::size_t store_mark;
        std::size_t var_mark;
        std::size_t pc;
        bool labeling;
        // disjunction
        const ConstraintTerm* alternative = nullptr;
        const std::optional<std::string>* name = nullptr;
        // labeling
        int var = -1;
        FiniteDomain values;
        std::int64_t last = 0;
    };

    void emit(Port p, int var = -1, int cstr = -1, const FiniteDomain* before = nullptr) {
        if (aborted_) return;
        RawEvent e{p, ++chrono_, depth_, node_, labeling_, var, cstr, before};
        if (sink_(EventView(*this, e)) == Flow::abort) aborted_ = true;
    }

    // Main loop: run statements, then labeling; on failure backtrack to the
    // most recent choice with an untried alternative.
    void execute() {
        bool failed = false;
        for (;;) {
            if (aborted_) return;
            if (failed) {
                emit(Port::failure);
                ++stats_.failures;
                auto r = backtrack();
                if (!r) return;
                failed = !*r;
                continue;
            }
            if (pc_ < prog_.statements.size()) {
                const auto& st = prog_.statements[pc_++];
                if (st.kind == Statement::Kind::declare) {
                    declare(prog_.variables[st.index]);
                } else {
                    const auto& c = prog_.constraints[st.index];
                    failed = !post_term(c.term, c.name, false);
                }
                continue;
            }
            if (prog_.labeling) {
                labeling_ = true;
                int var = select_variable();
                if (var >= 0) {
                    failed = !branch(var);
                    continue;
                }
            }
            if (!vars_.empty() || prog_.labeling) {
                emit(Port::solution);
                ++stats_.solutions;
                Assignment a;
                for (const auto& v : vars_) a.emplace_back(v.decl->name, v.dom);
                stats_.answers.push_back(std::move(a));
                if (opts_.max_solutions != 0 && stats_.solutions >= opts_.max_solutions) return;
            }
            auto r = backtrack();
            if (!r) return;
            failed = !*r;
        }
    }

    void declare(const VariableDecl& d) {
        vars_.push_back({next_var_id_++, &d, d.domain, {}});
        emit(Port::newVariable, static_cast<int>(vars_.size() - 1));
    }

    /// Posts a term; returns false on failure.
    bool post_term(const ConstraintTerm& t, const std::optional<std::string>& name, bool from_search) {
        using K = ConstraintTerm::Kind;
        switch (t.kind) {
            case K::disj: {
                Choice ch = open_choice();
                ch.alternative = &t.branches[1];
                ch.name = &name;
                choices_.push_back(std::move(ch));
                return post_term(t.branches[0], name, true);
            }
            case K::alldifferent: {
                for (std::size_t i = 0; i < t.vars.size(); ++i) {
                    for (std::size_t j = i + 1; j < t.vars.size(); ++j) {
                        ConstraintState c = make_constraint(name, K::neq, Kernel::neq_offset);
                        c.vars = {t.vars[i], t.vars[j]};
                        if (!post_kernel(std::move(c), from_search)) return false;
                    }
                }
                return true;
            }
            case K::eq: return post_simple(t, name, Kernel::eq, from_search);
            case K::eqc: return post_simple(t, name, Kernel::eqc, from_search);
            case K::neq: return post_simple(t, name, Kernel::neq_offset, from_search);
            case K::neq_offset: return post_simple(t, name, Kernel::neq_offset, from_search);
            case K::lt: return post_simple(t, name, Kernel::lt, from_search);
            case K::leq: return post_simple(t, name, Kernel::leq, from_search);
            case K::element: {
                ConstraintState c = make_constraint(name, t.kind, Kernel::element);
                c.vars = t.vars;
                c.table = &t.table;
                return post_kernel(std::move(c), from_search);
            }
        }
        return true;
    }

    ConstraintState make_constraint(const std::optional<std::string>& name, ConstraintTerm::Kind source, Kernel k) {
        ConstraintState c;
        c.id = 0;
        c.name = &name;
        c.source = source;
        c.kernel = k;
        return c;
    }

    bool post_simple(const ConstraintTerm& t, const std::optional<std::string>& name, Kernel k, bool from_search) {
        ConstraintState c = make_constraint(name, t.kind, k);
        c.vars = t.vars;
        c.constant = t.constant;
        return post_kernel(std::move(c), from_search);
    }

    bool post_kernel(ConstraintState c, bool from_search) {
        c.id = next_cstr_id_++;
        int idx = static_cast<int>(store_.size());
        store_.push_back(std::move(c));
        in_queue_.push_back(0);
        for (int v : unique_vars(store_.back())) vars_[v].watchers.push_back(idx);
        emit(Port::newConstraint, -1, idx);
        if (from_search) emit(Port::post, -1, idx);
        if (!activate(idx)) return false;
        return propagate();
    }

    static std::vector<int> unique_vars(const ConstraintState& c) {
        std::vector<int> out;
        for (int v : c.vars) {
            if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
        }
        return out;
    }

    bool propagate() {
        while (!queue_.empty()) {
            if (aborted_) return true;
            int c = queue_.front();
            queue_.pop_front();
            in_queue_[c] = 0;
            emit(Port::awake, -1, c);
            if (!activate(c)) return false;
        }
        return true;
    }

    void clear_queue() {
        for (int c : queue_) in_queue_[c] = 0;
        queue_.clear();
    }

    // Runs the filtering of constraint c: reduce events per shrunk variable,
    // then one of suspend/entail/reject, then schedule events for watchers.
    bool activate(int c) {
        auto& k = store_[c];
        std::vector<int> vars = unique_vars(k);
        std::vector<FiniteDomain> doms;
        doms.reserve(vars.size());
        for (int v : vars) doms.push_back(vars_[v].dom);
        auto slot = [&](int var) -> FiniteDomain& {
            for (std::size_t i = 0; i < vars.size(); ++i) {
                if (vars[i] == var) return doms[i];
            }
            return doms[0];
        };

        bool ok = filter(k, slot);
        if (!ok) {
            emit(Port::reject, -1, c);
            clear_queue();
            return false;
        }
        std::vector<int> changed;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            int v = vars[i];
            if (doms[i] == vars_[v].dom) continue;
            trail_.push_back({v, -1, std::move(vars_[v].dom)});
            vars_[v].dom = std::move(doms[i]);
            changed.push_back(v);
            emit(Port::reduce, v, c, &trail_.back().old);
        }
        if (entailed(store_[c])) {
            store_[c].active = false;
            trail_.push_back({-1, c, {}});
            emit(Port::entail, -1, c);
        } else {
            emit(Port::suspend, -1, c);
        }
        std::vector<int> wake;
        for (int v : changed) {
            for (int w : vars_[v].watchers) {
                if (w == c || !store_[w].active || in_queue_[w]) continue;
                if (std::find(wake.begin(), wake.end(), w) == wake.end()) wake.push_back(w);
            }
        }
        std::sort(wake.begin(), wake.end());
        for (int w : wake) {
            queue_.push_back(w);
            in_queue_[w] = 1;
            emit(Port::schedule, -1, w);
        }
        return true;
    }

    template <class Slot>
    bool filter(const ConstraintState& k, Slot&& slot) {
        switch (k.kernel) {
            case Kernel::eq: {
                FiniteDomain& x = slot(k.vars[0]);
                FiniteDomain& y = slot(k.vars[1]);
                for (;;) {
                    std::int64_t lo = std::max(x.min(), y.min());
                    std::int64_t hi = std::min(x.max(), y.max());
                    FiniteDomain nx = x.restrict_to(lo, hi);
                    FiniteDomain ny = y.restrict_to(lo, hi);
                    if (nx.empty() || ny.empty()) return false;
                    if (nx == x && ny == y) return true;
                    x = std::move(nx);
                    y = std::move(ny);
                }
            }
            case Kernel::eqc: {
                FiniteDomain& x = slot(k.vars[0]);
                if (!x.contains(k.constant)) return false;
                x = FiniteDomain::singleton(k.constant);
                return true;
            }
            case Kernel::neq_offset: {
                // x != y + c
                FiniteDomain& x = slot(k.vars[0]);
                FiniteDomain& y = slot(k.vars[1]);
                if (k.vars[0] == k.vars[1]) return k.constant != 0;
                for (bool again = true; again;) {
                    again = false;
                    if (y.is_singleton() && x.contains(y.min() + k.constant)) {
                        x = x.remove_value(y.min() + k.constant);
                        if (x.empty()) return false;
                        again = true;
                    }
                    if (x.is_singleton() && y.contains(x.min() - k.constant)) {
                        y = y.remove_value(x.min() - k.constant);
                        if (y.empty()) return false;
                        again = true;
                    }
                }
                return true;
            }
            case Kernel::lt:
            case Kernel::leq: {
                std::int64_t gap = k.kernel == Kernel::lt ? 1 : 0;
                FiniteDomain& x = slot(k.vars[0]);
                FiniteDomain& y = slot(k.vars[1]);
                if (k.vars[0] == k.vars[1]) return gap == 0;
                for (;;) {
                    FiniteDomain nx = x.restrict_to(x.min(), y.max() - gap);
                    if (nx.empty()) return false;
                    FiniteDomain ny = y.restrict_to(nx.min() + gap, y.max());
                    if (ny.empty()) return false;
                    if (nx == x && ny == y) return true;
                    x = std::move(nx);
                    y = std::move(ny);
                }
            }
            case Kernel::element: {
                FiniteDomain& index = slot(k.vars[0]);
                FiniteDomain& value = slot(k.vars[1]);
                const auto& table = *k.table;
                std::vector<std::int64_t> kept_index;
                std::vector<std::int64_t> supported;
                for (std::size_t i = 1; i <= table.size(); ++i) {
                    auto pos = static_cast<std::int64_t>(i);
                    if (index.contains(pos) && value.contains(table[i - 1])) {
                        kept_index.push_back(pos);
                        supported.push_back(table[i - 1]);
                    }
                }
                if (kept_index.empty()) return false;
                FiniteDomain ni = FiniteDomain::of_values(std::move(kept_index));
                FiniteDomain nv = value.intersect(FiniteDomain::of_values(std::move(supported)));
                if (k.vars[0] == k.vars[1]) {
                    ni = ni.intersect(nv);
                    if (ni.empty()) return false;
                    index = ni;
                    return true;
                }
                index = std::move(ni);
                value = std::move(nv);
                return true;
            }
        }
        return true;
    }

    bool entailed(const ConstraintState& k) const {
        auto dom = [&](std::size_t i) -> const FiniteDomain& { return vars_[k.vars[i]].dom; };
        switch (k.kernel) {
            case Kernel::eq: return dom(0).is_singleton() && dom(1).is_singleton() && dom(0).min() == dom(1).min();
            case Kernel::eqc: return true;
            case Kernel::neq_offset: {
                const auto& x = dom(0);
                const auto& y = dom(1);
                if (k.vars[0] == k.vars[1]) return true;
                if (x.max() < y.min() + k.constant || x.min() > y.max() + k.constant) return true;
                if (y.is_singleton() && !x.contains(y.min() + k.constant)) return true;
                if (x.is_singleton() && !y.contains(x.min() - k.constant)) return true;
                return false;
            }
            case Kernel::lt: return k.vars[0] != k.vars[1] && dom(0).max() < dom(1).min();
            case Kernel::leq: return dom(0).max() <= dom(1).min();
            case Kernel::element: return dom(0).is_singleton() && dom(1).is_singleton();
        }
        return false;
    }

    Choice open_choice() {
        Choice ch;
        ch.id = next_node_id_++;
        ch.depth = depth_ + 1;
        ch.trail_mark = trail_.size();
        ch.store_mark = store_.size();
        ch.var_mark = vars_.size();
        ch.pc = pc_;
        ch.labeling = labeling_;
        node_ = ch.id;
        depth_ = ch.depth;
        emit(Port::choicePoint);
        return ch;
    }

    int select_variable() const {
        int best = -1;
        for (int v : prog_.labeling->vars) {
            const auto& d = vars_[v].dom;
            if (d.is_singleton()) continue;
            if (prog_.labeling->var_order == VarOrder::leftmost) return v;
            if (best < 0 || d.size() < vars_[best].dom.size()) best = v;
        }
        return best;
    }

    bool branch(int var) {
        Choice ch = open_choice();
        ch.var = var;
        ch.values = vars_[var].dom;
        bool up = prog_.labeling->value_order == ValueOrder::up;
        ch.last = up ? ch.values.min() : ch.values.max();
        std::int64_t value = ch.last;
        choices_.push_back(std::move(ch));
        return post_decision(var, value);
    }

    bool post_decision(int var, std::int64_t value) {
        ConstraintState c = make_constraint(no_name_, ConstraintTerm::Kind::eqc, Kernel::eqc);
        c.vars = {var};
        c.constant = value;
        return post_kernel(std::move(c), true);
    }

    void restore(const Choice& ch) {
        while (trail_.size() > ch.trail_mark) {
            auto& t = trail_.back();
            if (t.var >= 0) {
                vars_[t.var].dom = std::move(t.old);
            } else {
                store_[t.cstr].active = true;
            }
            trail_.pop_back();
        }
        while (store_.size() > ch.store_mark) {
            int idx = static_cast<int>(store_.size() - 1);
            for (int v : unique_vars(store_.back())) {
                auto& w = vars_[v].watchers;
                if (!w.empty() && w.back() == idx) w.pop_back();
            }
            store_.pop_back();
            in_queue_.pop_back();
        }
        vars_.resize(ch.var_mark);
        clear_queue();
    }

    /// Returns to the most recent pending choice and posts its next
    /// alternative. nullopt when no choice is pending; otherwise whether the
    /// alternative posted without failure.
    std::optional<bool> backtrack() {
        if (choices_.empty() || aborted_) return std::nullopt;
        Choice& ch = choices_.back();
        restore(ch);
        node_ = ch.id;
        depth_ = ch.depth;
        labeling_ = ch.labeling;
        pc_ = ch.pc;
        emit(Port::backTo);
        if (ch.alternative) {
            const ConstraintTerm* alt = ch.alternative;
            const std::optional<std::string>* name = ch.name;
            choices_.pop_back();
            return post_term(*alt, *name, true);
        }
        bool up = prog_.labeling->value_order == ValueOrder::up;
        auto next = up ? ch.values.next_above(ch.last) : ch.values.next_below(ch.last);
        // A choice is only kept while it has an untried value.
        std::int64_t value = *next;
        ch.last = value;
        auto after = up ? ch.values.next_above(value) : ch.values.next_below(value);
        int var = ch.var;
        if (!after) choices_.pop_back();
        return post_decision(var, value);
    }

    const Program& prog_;
    Sink& sink_;
    RunOptions opts_;
    RunStats stats_;
    std::vector<TrailEntry> trail_;
    std::vector<Choice> choices_;
    std::size_t pc_ = 0;
    std::int64_t next_var_id_ = 1;
    std::int64_t next_cstr_id_ = 1;
    std::int64_t next_node_id_ = 1;
    bool aborted_ = false;
    const std::optional<std::string> no_name_;
};

/// Executes `prog`, calling `sink(const EventView&) -> Flow` once per event
/// in chrono order. Deterministic for a given program and clock.
template <class Sink>
RunStats run(const Program& prog, Sink&& sink, RunOptions opts = {}) {
    Engine<std::remove_reference_t<Sink>> engine(prog, sink, std::move(opts));
    return engine.run();
}

/// Untraced execution.
inline RunStats run_untraced(const Program& prog, RunOptions opts = {}) {
    NoTrace sink;
    return run(prog, sink, std::move(opts));
}

}  // namespace codeine
