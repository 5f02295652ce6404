#pragma once

// Active pattern base and the per-event match check.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "codeine/error.hpp"
#include "codeine/pattern.hpp"
#include "codeine/port.hpp"

namespace codeine {

struct MatchResult {
    std::vector<std::string> labels;  // base order
    bool sync = false;
    AttributeSet collect;             // present on the event
    bool dropped = false;             // some requested attribute was absent

    bool matched() const noexcept { return !labels.empty(); }
};

class PatternBase {
public:
    struct Entry {
        Pattern pattern;
        PortMask ports = 0;
        AttributeSet collect;
    };

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

    bool contains(std::string_view label) const {
        for (const auto& e : entries_) {
            if (e.pattern.label == label) return true;
        }
        return false;
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& e : entries_) out.push_back(e.pattern.label);
        return out;
    }

    bool has_sync() const {
        for (const auto& e : entries_) {
            if (e.pattern.sync) return true;
        }
        return false;
    }

    /// Labels whose formula can match at port `p`, in base order.
    std::vector<std::string> candidates(Port p) const {
        std::vector<std::string> out;
        for (int i : index_[static_cast<std::size_t>(p)]) out.push_back(entries_[i].pattern.label);
        return out;
    }

    /// All-or-nothing insertion. Throws ProtocolError("duplicate-label")
    /// when a label is already active or repeated in `patterns`.
    void add(std::vector<Pattern> patterns) {
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            const auto& label = patterns[i].label;
            bool repeated = contains(label);
            for (std::size_t j = 0; j < i && !repeated; ++j) repeated = patterns[j].label == label;
            if (repeated) throw ProtocolError("duplicate-label", "label '" + label + "' is already active");
        }
        for (auto& p : patterns) {
            Entry e;
            e.ports = possible_ports(*p.formula);
            e.collect = p.collected();
            e.pattern = std::move(p);
            entries_.push_back(std::move(e));
        }
        reindex();
    }

    /// Parses pattern text (one or more '.'-terminated patterns) and adds
    /// them atomically. Parse and type errors propagate unchanged.
    void add_text(std::string_view text) {
        auto patterns = parse_patterns(text);
        if (patterns.empty()) throw ProtocolError("empty-add", "no pattern in ADD");
        add(std::move(patterns));
    }

    /// Removes every listed label; throws ProtocolError("unknown-label") and
    /// leaves the base unchanged if any is not active.
    void remove(const std::vector<std::string>& labels) {
        for (const auto& l : labels) {
            if (!contains(l)) throw ProtocolError("unknown-label", "no active pattern labeled '" + l + "'");
        }
        std::vector<Entry> kept;
        for (auto& e : entries_) {
            bool drop = false;
            for (const auto& l : labels) drop = drop || e.pattern.label == l;
            if (!drop) kept.push_back(std::move(e));
        }
        entries_ = std::move(kept);
        reindex();
    }

    void reset() {
        entries_.clear();
        reindex();
    }

    /// True if no pattern can match at port `p`; cheap pre-check.
    bool silent_at(Port p) const noexcept { return index_[static_cast<std::size_t>(p)].empty(); }

    /// Checks one event. `src` provides `has(Attribute)` and
    /// `get(Attribute) -> optional<AttributeValue>`; each attribute is fetched
    /// at most once for the whole base.
    template <class Source>
    MatchResult check(Port port, const Source& src) const {
        MatchResult r;
        const auto& cands = index_[static_cast<std::size_t>(port)];
        if (cands.empty()) return r;
        AttributeCache<Source> cache(src);
        AttributeSet wanted;
        for (int i : cands) {
            const auto& e = entries_[i];
            if (!eval_formula(*e.pattern.formula, cache)) continue;
            r.labels.push_back(e.pattern.label);
            r.sync = r.sync || e.pattern.sync;
            wanted |= e.collect;
        }
        wanted.for_each([&](Attribute a) {
            if (src.has(a)) {
                r.collect.insert(a);
            } else {
                r.dropped = true;
            }
        });
        return r;
    }

private:
    void reindex() {
        for (auto& v : index_) v.clear();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            for (std::size_t p = 0; p < kPortCount; ++p) {
                if (entries_[i].ports & (1u << p)) index_[p].push_back(static_cast<int>(i));
            }
        }
    }

    std::vector<Entry> entries_;
    std::array<std::vector<int>, kPortCount> index_;
};

}  // namespace codeine
