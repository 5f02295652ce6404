#pragma once

// Minimal single-element XML reader/writer for the line-framed trace stream.
// Supports elements, attributes with double or single quotes, nested child
// elements, the five predefined entities and numeric character references.
// Text content, comments, CDATA and processing instructions are rejected:
// the trace schema never produces them.

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "codeine/error.hpp"

namespace codeine::xml {

struct Element {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attributes;
    std::vector<Element> children;

    const std::string* attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes) {
            if (k == key) return &v;
        }
        return nullptr;
    }
};

/// Escapes text for use inside a double-quoted attribute value. Newlines are
/// written as character references so an element stays on one line.
inline void append_escaped(std::string& out, std::string_view text) {
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\n': out += "&#10;"; break;
            case '\r': out += "&#13;"; break;
            case '\t': out += "&#9;"; break;
            default: out += c;
        }
    }
}

inline void append_attribute(std::string& out, std::string_view key, std::string_view value) {
    out += ' ';
    out += key;
    out += "=\"";
    append_escaped(out, value);
    out += '"';
}

inline void write(std::string& out, const Element& e) {
    out += '<';
    out += e.name;
    for (const auto& [k, v] : e.attributes) append_attribute(out, k, v);
    if (e.children.empty()) {
        out += "/>";
        return;
    }
    out += '>';
    for (const auto& c : e.children) write(out, c);
    out += "</";
    out += e.name;
    out += '>';
}

namespace detail {

class Reader {
public:
    explicit Reader(std::string_view text) : text_(text) {}

    Element document() {
        skip_ws();
        Element e = element();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters after element");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError("xml: " + what, pos_); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool at(char c) const { return pos_ < text_.size() && text_[pos_] == c; }

    void expect(char c) {
        if (!at(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    static bool name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':'; }
    static bool name_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' || c == '.';
    }

    std::string name() {
        if (pos_ >= text_.size() || !name_start(text_[pos_])) fail("expected name");
        std::size_t start = pos_;
        while (pos_ < text_.size() && name_char(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x110000) {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            fail("character reference out of range");
        }
    }

    std::string attribute_value() {
        if (!at('"') && !at('\'')) fail("expected quoted attribute value");
        char quote = text_[pos_++];
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != quote) {
            char c = text_[pos_];
            if (c == '<') fail("'<' in attribute value");
            if (c != '&') {
                out += c;
                ++pos_;
                continue;
            }
            std::size_t semi = text_.find(';', pos_);
            if (semi == std::string_view::npos) fail("unterminated entity");
            std::string_view ent = text_.substr(pos_ + 1, semi - pos_ - 1);
            if (ent == "amp") {
                out += '&';
            } else if (ent == "lt") {
                out += '<';
            } else if (ent == "gt") {
                out += '>';
            } else if (ent == "quot") {
                out += '"';
            } else if (ent == "apos") {
                out += '\'';
            } else if (ent.size() > 1 && ent[0] == '#') {
                std::uint32_t cp = 0;
                bool hex = ent[1] == 'x' || ent[1] == 'X';
                std::string_view digits = ent.substr(hex ? 2 : 1);
                if (digits.empty()) fail("bad character reference");
                for (char d : digits) {
                    int v;
                    if (std::isdigit(static_cast<unsigned char>(d))) {
                        v = d - '0';
                    } else if (hex && std::isxdigit(static_cast<unsigned char>(d))) {
                        v = std::tolower(static_cast<unsigned char>(d)) - 'a' + 10;
                    } else {
                        fail("bad character reference");
                    }
                    cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
                    if (cp > 0x10FFFF) fail("character reference out of range");
                }
                append_utf8(out, cp);
            } else {
                fail("unknown entity '&" + std::string(ent) + ";'");
            }
            pos_ = semi + 1;
        }
        if (pos_ >= text_.size()) fail("unterminated attribute value");
        ++pos_;
        return out;
    }

    Element element() {
        expect('<');
        Element e;
        e.name = name();
        for (;;) {
            std::size_t before = pos_;
            skip_ws();
            if (at('/')) {
                ++pos_;
                expect('>');
                return e;
            }
            if (at('>')) {
                ++pos_;
                break;
            }
            if (pos_ == before) fail("expected whitespace before attribute");
            std::string key = name();
            for (const auto& [k, v] : e.attributes) {
                if (k == key) fail("duplicate attribute '" + key + "'");
            }
            skip_ws();
            expect('=');
            skip_ws();
            e.attributes.emplace_back(std::move(key), attribute_value());
        }
        for (;;) {
            skip_ws();
            if (pos_ + 1 < text_.size() && text_[pos_] == '<' && text_[pos_ + 1] == '/') {
                pos_ += 2;
                if (name() != e.name) fail("mismatched closing tag for '" + e.name + "'");
                skip_ws();
                expect('>');
                return e;
            }
            if (!at('<')) fail(pos_ >= text_.size() ? "unterminated element '" + e.name + "'" : "text content not supported");
            if (pos_ + 1 < text_.size() && (text_[pos_ + 1] == '!' || text_[pos_ + 1] == '?')) {
                fail("comments, CDATA and processing instructions not supported");
            }
            e.children.push_back(element());
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses exactly one element (surrounding whitespace allowed).
inline Element parse(std::string_view text) { return detail::Reader(text).document(); }

}  // namespace codeine::xml
