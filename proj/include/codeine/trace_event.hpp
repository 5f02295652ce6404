#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codeine/attribute_value.hpp"
#include "codeine/domain.hpp"
#include "codeine/error.hpp"
#include "codeine/port.hpp"
#include "codeine/xml.hpp"

namespace codeine {

struct VarDomain {
    std::string vident;
    FiniteDomain domain;
    friend bool operator==(const VarDomain&, const VarDomain&) = default;
};

// ── TraceEvent ──────────────────────────────────────────────────────────────
// One execution event. Every attribute except the port is optional so the
// same type represents both complete events and partial (projected) ones.

struct TraceEvent {
    Port port = Port::beginExec;
    std::optional<std::int64_t> chrono;
    std::optional<std::int64_t> depth;
    std::optional<std::int64_t> node;
    std::optional<std::int64_t> time;
    std::optional<std::string> stage;
    std::optional<std::string> vident;
    std::optional<std::string> vname;
    std::optional<std::string> cident;
    std::optional<std::string> cname;
    std::optional<std::string> cexternal;
    std::optional<std::string> cinternal;
    std::optional<FiniteDomain> vdom;
    std::optional<FiniteDomain> delta;
    std::optional<std::string> update;
    std::optional<std::vector<std::string>> named_vars;
    std::optional<std::vector<VarDomain>> full_dom;

    bool has(Attribute a) const {
        switch (a) {
            case Attribute::chrono: return chrono.has_value();
            case Attribute::port: return true;
            case Attribute::depth: return depth.has_value();
            case Attribute::node: return node.has_value();
            case Attribute::time: return time.has_value();
            case Attribute::stage: return stage.has_value();
            case Attribute::vident: return vident.has_value();
            case Attribute::vname: return vname.has_value();
            case Attribute::cident: return cident.has_value();
            case Attribute::cname: return cname.has_value();
            case Attribute::cexternal: return cexternal.has_value();
            case Attribute::cinternal: return cinternal.has_value();
            case Attribute::vdom: return vdom.has_value();
            case Attribute::delta: return delta.has_value();
            case Attribute::update: return update.has_value();
            case Attribute::named_vars: return named_vars.has_value();
            case Attribute::full_dom: return full_dom.has_value();
        }
        return false;
    }

    AttributeSet present() const {
        AttributeSet s;
        for (std::size_t i = 0; i < kAttributeCount; ++i) {
            auto a = static_cast<Attribute>(i);
            if (has(a)) s.insert(a);
        }
        return s;
    }

    std::optional<AttributeValue> get(Attribute a) const {
        auto str = [](const std::optional<std::string>& s) -> std::optional<AttributeValue> {
            if (!s) return std::nullopt;
            return AttributeValue(*s);
        };
        auto num = [](const std::optional<std::int64_t>& n) -> std::optional<AttributeValue> {
            if (!n) return std::nullopt;
            return AttributeValue(*n);
        };
        auto dom = [](const std::optional<FiniteDomain>& d) -> std::optional<AttributeValue> {
            if (!d) return std::nullopt;
            return AttributeValue(*d);
        };
        switch (a) {
            case Attribute::chrono: return num(chrono);
            case Attribute::port: return AttributeValue(port);
            case Attribute::depth: return num(depth);
            case Attribute::node: return num(node);
            case Attribute::time: return num(time);
            case Attribute::stage: return str(stage);
            case Attribute::vident: return str(vident);
            case Attribute::vname: return str(vname);
            case Attribute::cident: return str(cident);
            case Attribute::cname: return str(cname);
            case Attribute::cexternal: return str(cexternal);
            case Attribute::cinternal: return str(cinternal);
            case Attribute::vdom: return dom(vdom);
            case Attribute::delta: return dom(delta);
            case Attribute::update: return str(update);
            case Attribute::named_vars: {
                if (!named_vars) return std::nullopt;
                AttributeValue::List l;
                for (const auto& v : *named_vars) l.emplace_back(v);
                return AttributeValue(std::move(l));
            }
            case Attribute::full_dom: {
                if (!full_dom) return std::nullopt;
                AttributeValue::List l;
                for (const auto& vd : *full_dom) l.emplace_back(AttributeValue::List{vd.vident, vd.domain});
                return AttributeValue(std::move(l));
            }
        }
        return std::nullopt;
    }

    /// Stores `v`; throws if its tag does not fit the attribute.
    void set(Attribute a, const AttributeValue& v) {
        try {
            switch (a) {
                case Attribute::chrono: chrono = v.as_integer(); return;
                case Attribute::port: port = v.as_port(); return;
                case Attribute::depth: depth = v.as_integer(); return;
                case Attribute::node: node = v.as_integer(); return;
                case Attribute::time: time = v.as_integer(); return;
                case Attribute::stage: stage = v.as_string(); return;
                case Attribute::vident: vident = v.as_string(); return;
                case Attribute::vname: vname = v.as_string(); return;
                case Attribute::cident: cident = v.as_string(); return;
                case Attribute::cname: cname = v.as_string(); return;
                case Attribute::cexternal: cexternal = v.as_string(); return;
                case Attribute::cinternal: cinternal = v.as_string(); return;
                case Attribute::vdom: vdom = v.as_domain(); return;
                case Attribute::delta: delta = v.as_domain(); return;
                case Attribute::update: update = v.as_string(); return;
                case Attribute::named_vars: {
                    std::vector<std::string> out;
                    for (const auto& e : v.as_list()) out.push_back(e.as_string());
                    named_vars = std::move(out);
                    return;
                }
                case Attribute::full_dom: {
                    std::vector<VarDomain> out;
                    for (const auto& e : v.as_list()) {
                        out.push_back({e.as_list().at(0).as_string(), e.as_list().at(1).as_domain()});
                    }
                    full_dom = std::move(out);
                    return;
                }
            }
        } catch (const std::bad_variant_access&) {
            throw Error("value of wrong type for attribute '" + std::string(to_string(a)) + "'");
        }
    }

    void clear(Attribute a) {
        switch (a) {
            case Attribute::chrono: chrono.reset(); break;
            case Attribute::port: break;
            case Attribute::depth: depth.reset(); break;
            case Attribute::node: node.reset(); break;
            case Attribute::time: time.reset(); break;
            case Attribute::stage: stage.reset(); break;
            case Attribute::vident: vident.reset(); break;
            case Attribute::vname: vname.reset(); break;
            case Attribute::cident: cident.reset(); break;
            case Attribute::cname: cname.reset(); break;
            case Attribute::cexternal: cexternal.reset(); break;
            case Attribute::cinternal: cinternal.reset(); break;
            case Attribute::vdom: vdom.reset(); break;
            case Attribute::delta: delta.reset(); break;
            case Attribute::update: update.reset(); break;
            case Attribute::named_vars: named_vars.reset(); break;
            case Attribute::full_dom: full_dom.reset(); break;
        }
    }

    /// Copy keeping only the attributes in `keep` (the port is always kept).
    TraceEvent project(AttributeSet keep) const {
        TraceEvent out = *this;
        for (std::size_t i = 0; i < kAttributeCount; ++i) {
            auto a = static_cast<Attribute>(i);
            if (!keep.contains(a)) out.clear(a);
        }
        return out;
    }

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// ── XML encoding ────────────────────────────────────────────────────────────

namespace detail {

// Attribute order on the wire. port is the element name; vdom, delta,
// update and full_dom are child elements.
inline constexpr Attribute kXmlAttributeOrder[] = {
    Attribute::chrono, Attribute::depth,  Attribute::node,      Attribute::time,
    Attribute::stage,  Attribute::cident, Attribute::vident,    Attribute::vname,
    Attribute::cname,  Attribute::cexternal, Attribute::cinternal, Attribute::named_vars,
};

inline std::string join(const std::vector<std::string>& items, char sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        std::size_t start = i;
        while (i < text.size() && text[i] != ' ') ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

inline void append_domain_child(std::string& out, std::string_view tag, const std::optional<std::string>& vident,
                                const FiniteDomain& d) {
    out += '<';
    out += tag;
    if (vident) xml::append_attribute(out, "vident", *vident);
    if (d.empty()) {
        out += "/>";
        return;
    }
    out += '>';
    for (const auto& r : d.ranges()) {
        out += "<range from=\"";
        out += std::to_string(r.lo);
        out += "\" to=\"";
        out += std::to_string(r.hi);
        out += "\"/>";
    }
    out += "</";
    out += tag;
    out += '>';
}

inline std::int64_t to_int(const std::string& s, std::string_view what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError("bad integer for '" + std::string(what) + "': '" + s + "'", 0);
    }
    return v;
}

inline FiniteDomain domain_from_children(const xml::Element& e) {
    std::vector<Range> ranges;
    for (const auto& r : e.children) {
        if (r.name != "range") throw ParseError("unexpected <" + r.name + "> inside <" + e.name + ">", 0);
        const auto* from = r.attribute("from");
        const auto* to = r.attribute("to");
        if (!from || !to) throw ParseError("<range> needs from and to", 0);
        auto lo = to_int(*from, "from");
        auto hi = to_int(*to, "to");
        if (lo > hi) throw ParseError("reversed <range>", 0);
        ranges.push_back({lo, hi});
    }
    return FiniteDomain(std::move(ranges));
}

/// Writes the XML attributes and children for `requested` into an
/// already-open start tag. Returns the children markup.
inline std::string append_payload(std::string& out, const TraceEvent& e, AttributeSet requested) {
    for (Attribute a : kXmlAttributeOrder) {
        if (!requested.contains(a)) continue;
        if (!e.has(a)) {
            throw Error("attribute '" + std::string(to_string(a)) + "' requested but absent on " +
                        std::string(to_string(e.port)) + " event");
        }
        if (a == Attribute::named_vars) {
            xml::append_attribute(out, "named_vars", join(*e.named_vars, ' '));
        } else {
            xml::append_attribute(out, to_string(a), to_display_string(*e.get(a)));
        }
    }
    std::string children;
    auto need = [&](Attribute a) {
        if (!requested.contains(a)) return false;
        if (!e.has(a)) {
            throw Error("attribute '" + std::string(to_string(a)) + "' requested but absent on " +
                        std::string(to_string(e.port)) + " event");
        }
        return true;
    };
    if (need(Attribute::vdom)) append_domain_child(children, "vdom", e.vident, *e.vdom);
    if (need(Attribute::delta)) append_domain_child(children, "delta", e.vident, *e.delta);
    if (need(Attribute::update)) {
        children += "<update";
        if (e.vident) xml::append_attribute(children, "vident", *e.vident);
        xml::append_attribute(children, "type", *e.update);
        children += "/>";
    }
    if (need(Attribute::full_dom)) {
        children += "<fulldom>";
        for (const auto& vd : *e.full_dom) append_domain_child(children, "vdom", vd.vident, vd.domain);
        children += "</fulldom>";
    }
    return children;
}

inline void close_element(std::string& out, std::string_view name, const std::string& children) {
    if (children.empty()) {
        out += "/>";
        return;
    }
    out += '>';
    out += children;
    out += "</";
    out += name;
    out += '>';
}

/// Reads the event payload of `el` into `e`. Unknown attributes and
/// children are ignored.
inline void read_payload(const xml::Element& el, TraceEvent& e) {
    for (const auto& [k, v] : el.attributes) {
        auto attr = attribute_from_name(k);
        if (!attr || k != to_string(*attr)) continue;
        switch (kind_of(*attr)) {
            case AttributeKind::integer: e.set(*attr, to_int(v, k)); break;
            case AttributeKind::string: e.set(*attr, v); break;
            case AttributeKind::port: {
                auto p = port_from_name(v);
                if (!p) throw ParseError("unknown port '" + v + "'", 0);
                e.port = *p;
                break;
            }
            case AttributeKind::list:
                if (*attr == Attribute::named_vars) e.named_vars = split_words(v);
                break;
            case AttributeKind::domain: break;
        }
    }
    for (const auto& c : el.children) {
        if (c.name == "vdom") {
            e.vdom = domain_from_children(c);
        } else if (c.name == "delta") {
            e.delta = domain_from_children(c);
        } else if (c.name == "update") {
            const auto* t = c.attribute("type");
            if (!t) throw ParseError("<update> needs type", 0);
            e.update = *t;
        } else if (c.name == "fulldom") {
            std::vector<VarDomain> doms;
            for (const auto& v : c.children) {
                if (v.name != "vdom") throw ParseError("unexpected <" + v.name + "> inside <fulldom>", 0);
                const auto* id = v.attribute("vident");
                doms.push_back({id ? *id : std::string(), domain_from_children(v)});
            }
            e.full_dom = std::move(doms);
        }
    }
}

}  // namespace detail

/// One trace element on a single physical line: element name is the port;
/// exactly the `requested` attributes are emitted, followed by `matched`
/// (space-separated labels, when non-empty) and `sync="true"` when `sync`.
/// Throws if a requested attribute is absent on `e`.
inline std::string serialize_event(const TraceEvent& e, AttributeSet requested,
                                   const std::vector<std::string>& matched_labels = {}, bool sync = false) {
    std::string out;
    std::string_view name = to_string(e.port);
    out += '<';
    out += name;
    std::string children = detail::append_payload(out, e, requested);
    if (!matched_labels.empty()) xml::append_attribute(out, "matched", detail::join(matched_labels, ' '));
    if (sync) out += " sync=\"true\"";
    detail::close_element(out, name, children);
    return out;
}

struct ParsedEvent {
    TraceEvent event;
    std::vector<std::string> matched;
    bool sync = false;
};

/// Inverse of serialize_event.
inline ParsedEvent parse_event(std::string_view text) {
    xml::Element el = xml::parse(text);
    auto port = port_from_name(el.name);
    if (!port) throw ParseError("unknown event element <" + el.name + ">", 0);
    ParsedEvent out;
    out.event.port = *port;
    detail::read_payload(el, out.event);
    if (const auto* m = el.attribute("matched")) out.matched = detail::split_words(*m);
    if (const auto* s = el.attribute("sync")) out.sync = (*s == "true");
    return out;
}

// ── `current` replies ───────────────────────────────────────────────────────

struct CurrentValues {
    TraceEvent values;              // attributes that were present
    bool has_port = false;          // values.port is meaningful
    std::vector<Attribute> absent;  // requested but absent on the event

    std::optional<AttributeValue> get(Attribute a) const {
        if (a == Attribute::port && !has_port) return std::nullopt;
        return values.get(a);
    }
};

inline std::string serialize_values(const TraceEvent& e, AttributeSet present, const std::vector<Attribute>& absent) {
    std::string out = "<values";
    if (present.contains(Attribute::port)) xml::append_attribute(out, "port", to_string(e.port));
    std::string children = detail::append_payload(out, e, present);
    if (!absent.empty()) {
        std::vector<std::string> names;
        for (auto a : absent) names.emplace_back(to_string(a));
        xml::append_attribute(out, "absent", detail::join(names, ' '));
    }
    detail::close_element(out, "values", children);
    return out;
}

inline CurrentValues parse_values(std::string_view text) {
    xml::Element el = xml::parse(text);
    if (el.name != "values") throw ParseError("expected <values>, got <" + el.name + ">", 0);
    CurrentValues out;
    detail::read_payload(el, out.values);
    out.has_port = el.attribute("port") != nullptr;
    if (const auto* a = el.attribute("absent")) {
        for (const auto& name : detail::split_words(*a)) out.absent.push_back(parse_attribute(name));
    }
    return out;
}

// ── Text rendering ──────────────────────────────────────────────────────────

/// One-line human rendering, e.g. `5 reduce c1 v1=[1-3] W=[0,4-268435455]`.
/// Only attributes present on `e` are printed.
inline std::string format_text_line(const TraceEvent& e) {
    std::string out;
    if (e.chrono) out += std::to_string(*e.chrono) + ' ';
    out += to_string(e.port);
    if (e.cident) out += ' ' + *e.cident;
    if (e.port == Port::newConstraint && e.cexternal) out += ' ' + *e.cexternal;
    if (e.vident && e.vdom) out += ' ' + *e.vident + '=' + format_domain(*e.vdom);
    if (e.delta) out += " W=" + format_domain(*e.delta);
    bool tree = e.port == Port::choicePoint || e.port == Port::backTo || e.port == Port::solution ||
                e.port == Port::failure;
    if (tree && e.node) out += " node=" + std::to_string(*e.node);
    if (tree && e.depth) out += " depth=" + std::to_string(*e.depth);
    return out;
}

}  // namespace codeine
