#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "codeine/error.hpp"

namespace codeine {

// ── Port ────────────────────────────────────────────────────────────────────
// The 15 event types of the finite-domain trace model.

enum class Port : std::uint8_t {
    newVariable,
    newConstraint,
    post,
    awake,
    reduce,
    suspend,
    entail,
    reject,
    schedule,
    choicePoint,
    backTo,
    failure,
    solution,
    beginExec,
    endExec,
};

inline constexpr std::size_t kPortCount = 15;

inline constexpr std::array<std::string_view, kPortCount> kPortNames = {
    "newVariable", "newConstraint", "post",        "awake",  "reduce",
    "suspend",     "entail",        "reject",      "schedule", "choicePoint",
    "backTo",      "failure",       "solution",    "beginExec", "endExec",
};

constexpr std::string_view to_string(Port p) noexcept { return kPortNames[static_cast<std::size_t>(p)]; }

constexpr std::optional<Port> port_from_name(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kPortCount; ++i) {
        if (kPortNames[i] == name) return static_cast<Port>(i);
    }
    return std::nullopt;
}

/// Bit set over ports.
using PortMask = std::uint16_t;
inline constexpr PortMask kAllPorts = (1u << kPortCount) - 1;
constexpr PortMask port_bit(Port p) noexcept { return static_cast<PortMask>(1u << static_cast<unsigned>(p)); }

/// Ports that carry a variable (vident, vname, vdom).
inline constexpr PortMask kVariablePorts = port_bit(Port::newVariable) | port_bit(Port::reduce);

/// Ports that carry a constraint (cident, cname, cexternal, cinternal).
inline constexpr PortMask kConstraintPorts = port_bit(Port::newConstraint) | port_bit(Port::post) |
                                             port_bit(Port::awake) | port_bit(Port::reduce) |
                                             port_bit(Port::suspend) | port_bit(Port::entail) |
                                             port_bit(Port::reject) | port_bit(Port::schedule);

// ── Attribute ───────────────────────────────────────────────────────────────

enum class Attribute : std::uint8_t {
    chrono,
    port,
    depth,
    node,
    time,
    stage,
    vident,
    vname,
    cident,
    cname,
    cexternal,
    cinternal,
    vdom,
    delta,
    update,
    named_vars,
    full_dom,
};

inline constexpr std::size_t kAttributeCount = 17;

inline constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "chrono", "port",  "depth",     "node",      "time", "stage",  "vident",     "vname",    "cident",
    "cname",  "cexternal", "cinternal", "vdom", "delta", "update", "named_vars", "full_dom",
};

constexpr std::string_view to_string(Attribute a) noexcept { return kAttributeNames[static_cast<std::size_t>(a)]; }

/// Resolves an attribute name, including the aliases `cstrRep` (cexternal)
/// and `cstr` (cident).
constexpr std::optional<Attribute> attribute_from_name(std::string_view name) noexcept {
    if (name == "cstrRep") return Attribute::cexternal;
    if (name == "cstr") return Attribute::cident;
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
        if (kAttributeNames[i] == name) return static_cast<Attribute>(i);
    }
    return std::nullopt;
}

inline Attribute parse_attribute(std::string_view name) {
    if (auto a = attribute_from_name(name)) return *a;
    throw Error("unknown attribute '" + std::string(name) + "'");
}

/// Value category of an attribute, used for static type checking of
/// pattern conditions.
enum class AttributeKind : std::uint8_t { integer, port, string, domain, list };

constexpr AttributeKind kind_of(Attribute a) noexcept {
    switch (a) {
        case Attribute::chrono:
        case Attribute::depth:
        case Attribute::node:
        case Attribute::time:
            return AttributeKind::integer;
        case Attribute::port:
            return AttributeKind::port;
        case Attribute::vdom:
        case Attribute::delta:
            return AttributeKind::domain;
        case Attribute::named_vars:
        case Attribute::full_dom:
            return AttributeKind::list;
        default:
            return AttributeKind::string;
    }
}

/// Ports on which an attribute may be present. Name attributes (vname,
/// cname) are additionally absent for anonymous entities.
constexpr PortMask ports_carrying(Attribute a) noexcept {
    switch (a) {
        case Attribute::vident:
        case Attribute::vname:
        case Attribute::vdom:
            return kVariablePorts;
        case Attribute::cident:
        case Attribute::cname:
        case Attribute::cexternal:
        case Attribute::cinternal:
            return kConstraintPorts;
        case Attribute::delta:
        case Attribute::update:
            return port_bit(Port::reduce);
        default:
            return kAllPorts;
    }
}

/// Static evaluation cost rank used to order attribute lookups: counters
/// first, identifiers and names next, materialized structures last.
constexpr int cost_rank(Attribute a) noexcept {
    switch (a) {
        case Attribute::chrono:
        case Attribute::depth:
        case Attribute::node:
        case Attribute::port:
        case Attribute::stage:
            return 0;
        case Attribute::time:
            return 1;
        case Attribute::vident:
        case Attribute::vname:
        case Attribute::cident:
        case Attribute::cname:
        case Attribute::update:
            return 2;
        default:
            return 3;
    }
}

/// Attributes whose computation materializes a domain or formats a term.
constexpr bool is_costly(Attribute a) noexcept { return cost_rank(a) == 3; }

// ── AttributeSet ────────────────────────────────────────────────────────────

class AttributeSet {
public:
    constexpr AttributeSet() = default;
    constexpr AttributeSet(std::initializer_list<Attribute> attrs) {
        for (auto a : attrs) insert(a);
    }

    constexpr void insert(Attribute a) noexcept { bits_ |= bit(a); }
    constexpr void erase(Attribute a) noexcept { bits_ &= ~bit(a); }
    constexpr bool contains(Attribute a) const noexcept { return (bits_ & bit(a)) != 0; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr std::uint32_t bits() const noexcept { return bits_; }

    constexpr AttributeSet& operator|=(AttributeSet o) noexcept {
        bits_ |= o.bits_;
        return *this;
    }
    constexpr bool is_subset_of(AttributeSet o) const noexcept { return (bits_ & ~o.bits_) == 0; }
    friend constexpr bool operator==(AttributeSet, AttributeSet) = default;

    static constexpr AttributeSet all() noexcept {
        AttributeSet s;
        s.bits_ = (1u << kAttributeCount) - 1;
        return s;
    }

    template <class F>
    constexpr void for_each(F&& f) const {
        for (std::size_t i = 0; i < kAttributeCount; ++i) {
            if (bits_ & (1u << i)) f(static_cast<Attribute>(i));
        }
    }

private:
    static constexpr std::uint32_t bit(Attribute a) noexcept { return 1u << static_cast<unsigned>(a); }
    std::uint32_t bits_ = 0;
};

}  // namespace codeine
