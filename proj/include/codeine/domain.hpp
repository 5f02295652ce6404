#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codeine/error.hpp"

namespace codeine {

/// Largest value of the default variable domain.
inline constexpr std::int64_t kDefaultMaxValue = 268435455;

struct Range {
    std::int64_t lo;
    std::int64_t hi;
    friend constexpr bool operator==(const Range&, const Range&) = default;
};

// ── FiniteDomain ────────────────────────────────────────────────────────────
// Ordered set of disjoint, non-adjacent inclusive ranges. The empty range
// list is the empty domain.

class FiniteDomain {
public:
    FiniteDomain() = default;

    /// Normalizes an arbitrary list of ranges (overlaps and adjacency merged).
    /// Throws on a reversed pair.
    explicit FiniteDomain(std::vector<Range> ranges) : ranges_(std::move(ranges)) { normalize(); }
    FiniteDomain(std::initializer_list<Range> ranges) : ranges_(ranges) { normalize(); }

    static FiniteDomain interval(std::int64_t lo, std::int64_t hi) {
        FiniteDomain d;
        if (lo <= hi) d.ranges_.push_back({lo, hi});
        return d;
    }
    static FiniteDomain singleton(std::int64_t v) { return interval(v, v); }
    static FiniteDomain of_values(std::vector<std::int64_t> values) {
        std::sort(values.begin(), values.end());
        FiniteDomain d;
        for (auto v : values) {
            if (!d.ranges_.empty() && v <= d.ranges_.back().hi + 1) {
                d.ranges_.back().hi = std::max(d.ranges_.back().hi, v);
            } else {
                d.ranges_.push_back({v, v});
            }
        }
        return d;
    }

    const std::vector<Range>& ranges() const noexcept { return ranges_; }
    bool empty() const noexcept { return ranges_.empty(); }
    bool is_singleton() const noexcept { return ranges_.size() == 1 && ranges_[0].lo == ranges_[0].hi; }

    std::int64_t size() const noexcept {
        std::int64_t n = 0;
        for (const auto& r : ranges_) n += r.hi - r.lo + 1;
        return n;
    }

    std::int64_t min() const {
        if (empty()) throw Error("min of an empty domain");
        return ranges_.front().lo;
    }
    std::int64_t max() const {
        if (empty()) throw Error("max of an empty domain");
        return ranges_.back().hi;
    }

    bool contains(std::int64_t v) const noexcept {
        auto it = std::lower_bound(ranges_.begin(), ranges_.end(), v,
                                   [](const Range& r, std::int64_t x) { return r.hi < x; });
        return it != ranges_.end() && it->lo <= v;
    }

    /// Smallest member strictly greater than `v`, if any.
    std::optional<std::int64_t> next_above(std::int64_t v) const noexcept {
        for (const auto& r : ranges_) {
            if (r.hi > v) return std::max(r.lo, v + 1);
        }
        return std::nullopt;
    }
    /// Largest member strictly below `v`, if any.
    std::optional<std::int64_t> next_below(std::int64_t v) const noexcept {
        for (auto it = ranges_.rbegin(); it != ranges_.rend(); ++it) {
            if (it->lo < v) return std::min(it->hi, v - 1);
        }
        return std::nullopt;
    }

    /// Removes [lo, hi]; returns the new domain and exactly the withdrawn values.
    std::pair<FiniteDomain, FiniteDomain> remove_range(std::int64_t lo, std::int64_t hi) const {
        if (lo > hi) throw Error("remove_range with lo > hi");
        FiniteDomain kept;
        FiniteDomain withdrawn;
        for (const auto& r : ranges_) {
            if (r.hi < lo || r.lo > hi) {
                kept.ranges_.push_back(r);
                continue;
            }
            if (r.lo < lo) kept.ranges_.push_back({r.lo, lo - 1});
            withdrawn.ranges_.push_back({std::max(r.lo, lo), std::min(r.hi, hi)});
            if (r.hi > hi) kept.ranges_.push_back({hi + 1, r.hi});
        }
        return {std::move(kept), std::move(withdrawn)};
    }

    FiniteDomain remove_value(std::int64_t v) const { return remove_range(v, v).first; }

    FiniteDomain restrict_to(std::int64_t lo, std::int64_t hi) const {
        FiniteDomain out;
        if (lo > hi) return out;
        for (const auto& r : ranges_) {
            if (r.hi < lo || r.lo > hi) continue;
            out.ranges_.push_back({std::max(r.lo, lo), std::min(r.hi, hi)});
        }
        return out;
    }

    FiniteDomain intersect(const FiniteDomain& o) const {
        FiniteDomain out;
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < ranges_.size() && j < o.ranges_.size()) {
            const auto& a = ranges_[i];
            const auto& b = o.ranges_[j];
            std::int64_t lo = std::max(a.lo, b.lo);
            std::int64_t hi = std::min(a.hi, b.hi);
            if (lo <= hi) out.ranges_.push_back({lo, hi});
            if (a.hi < b.hi) {
                ++i;
            } else {
                ++j;
            }
        }
        return out;
    }

    /// Members of *this not in `o`.
    FiniteDomain difference(const FiniteDomain& o) const {
        FiniteDomain out = *this;
        for (const auto& r : o.ranges_) {
            if (out.empty()) break;
            out = out.remove_range(r.lo, r.hi).first;
        }
        return out;
    }

    bool is_subset_of(const FiniteDomain& o) const { return difference(o).empty(); }

    friend bool operator==(const FiniteDomain&, const FiniteDomain&) = default;

private:
    void normalize() {
        for (const auto& r : ranges_) {
            if (r.lo > r.hi) throw Error("domain range with lo > hi");
        }
        std::sort(ranges_.begin(), ranges_.end(), [](const Range& a, const Range& b) { return a.lo < b.lo; });
        std::vector<Range> merged;
        for (const auto& r : ranges_) {
            if (!merged.empty() && r.lo <= merged.back().hi + 1) {
                merged.back().hi = std::max(merged.back().hi, r.hi);
            } else {
                merged.push_back(r);
            }
        }
        ranges_ = std::move(merged);
    }

    std::vector<Range> ranges_;
};

/// Canonical bracketed notation: "[0-1,3-4,6,8-268435455]".
inline std::string format_domain(const FiniteDomain& d) {
    std::string out = "[";
    bool first = true;
    for (const auto& r : d.ranges()) {
        if (!first) out += ',';
        first = false;
        out += std::to_string(r.lo);
        if (r.hi != r.lo) {
            out += '-';
            out += std::to_string(r.hi);
        }
    }
    out += ']';
    return out;
}

namespace detail {

inline std::int64_t parse_int_at(std::string_view text, std::size_t& pos, std::size_t base_offset) {
    std::size_t start = pos;
    if (pos < text.size() && text[pos] == '-') ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + pos, value);
    if (ec != std::errc() || ptr != text.data() + pos || pos == start) {
        throw ParseError("expected integer in domain", base_offset + start);
    }
    return value;
}

}  // namespace detail

/// Parses `[` range (`,` range)* `]` or `[]`, where a range is `int` or
/// `int-int`. Values may be given in any order; the result is normalized.
/// `base_offset` shifts reported error positions (for embedded domains).
inline FiniteDomain parse_domain(std::string_view text, std::size_t base_offset = 0) {
    std::size_t pos = 0;
    auto skip_ws = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    skip_ws();
    if (pos >= text.size() || text[pos] != '[') throw ParseError("expected '['", base_offset + pos);
    ++pos;
    skip_ws();
    std::vector<Range> ranges;
    if (pos < text.size() && text[pos] == ']') {
        ++pos;
    } else {
        for (;;) {
            skip_ws();
            std::size_t range_start = pos;
            std::int64_t lo = detail::parse_int_at(text, pos, base_offset);
            std::int64_t hi = lo;
            skip_ws();
            if (pos < text.size() && text[pos] == '-') {
                ++pos;
                skip_ws();
                hi = detail::parse_int_at(text, pos, base_offset);
                if (hi < lo) throw ParseError("reversed range bounds", base_offset + range_start);
            }
            ranges.push_back({lo, hi});
            skip_ws();
            if (pos < text.size() && text[pos] == ',') {
                ++pos;
                continue;
            }
            if (pos < text.size() && text[pos] == ']') {
                ++pos;
                break;
            }
            throw ParseError("expected ',' or ']'", base_offset + pos);
        }
    }
    skip_ws();
    if (pos != text.size()) throw ParseError("trailing characters after domain", base_offset + pos);
    return FiniteDomain(std::move(ranges));
}

}  // namespace codeine
