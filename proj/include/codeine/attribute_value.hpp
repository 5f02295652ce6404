#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "codeine/domain.hpp"
#include "codeine/port.hpp"

namespace codeine {

/// Tagged value of an event attribute: integer | string | port | domain |
/// list-of-values.
class AttributeValue {
public:
    using List = std::vector<AttributeValue>;
    using Storage = std::variant<std::int64_t, std::string, Port, FiniteDomain, List>;

    AttributeValue() : v_(std::int64_t{0}) {}
    AttributeValue(std::int64_t i) : v_(i) {}  // NOLINT(google-explicit-constructor)
    AttributeValue(int i) : v_(std::int64_t{i}) {}  // NOLINT(google-explicit-constructor)
    AttributeValue(std::string s) : v_(std::move(s)) {}  // NOLINT(google-explicit-constructor)
    AttributeValue(const char* s) : v_(std::string(s)) {}  // NOLINT(google-explicit-constructor)
    AttributeValue(Port p) : v_(p) {}  // NOLINT(google-explicit-constructor)
    AttributeValue(FiniteDomain d) : v_(std::move(d)) {}  // NOLINT(google-explicit-constructor)
    AttributeValue(List l) : v_(std::move(l)) {}  // NOLINT(google-explicit-constructor)

    bool is_integer() const noexcept { return std::holds_alternative<std::int64_t>(v_); }
    bool is_string() const noexcept { return std::holds_alternative<std::string>(v_); }
    bool is_port() const noexcept { return std::holds_alternative<Port>(v_); }
    bool is_domain() const noexcept { return std::holds_alternative<FiniteDomain>(v_); }
    bool is_list() const noexcept { return std::holds_alternative<List>(v_); }

    std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    Port as_port() const { return std::get<Port>(v_); }
    const FiniteDomain& as_domain() const { return std::get<FiniteDomain>(v_); }
    const List& as_list() const { return std::get<List>(v_); }

    const Storage& storage() const noexcept { return v_; }

    friend bool operator==(const AttributeValue& a, const AttributeValue& b) { return a.v_ == b.v_; }

private:
    Storage v_;
};

/// Human-readable rendering: integers and strings verbatim, domains in
/// bracket notation, lists bracketed and comma-separated.
inline std::string to_display_string(const AttributeValue& v) {
    if (v.is_integer()) return std::to_string(v.as_integer());
    if (v.is_string()) return v.as_string();
    if (v.is_port()) return std::string(to_string(v.as_port()));
    if (v.is_domain()) return format_domain(v.as_domain());
    std::string out = "[";
    bool first = true;
    for (const auto& e : v.as_list()) {
        if (!first) out += ',';
        first = false;
        out += to_display_string(e);
    }
    return out + "]";
}

}  // namespace codeine
