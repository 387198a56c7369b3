#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ppco/core.hpp"

// Minimal element-only XML layer for the canonical wire form: no attributes,
// no namespaces, single line. An element carries either text or children.
namespace ppco::xml {

struct Element {
    std::string name;
    std::string text;
    std::vector<Element> children;

    Element() = default;
    explicit Element(std::string n) : name(std::move(n)) {}
    Element(std::string n, std::string t) : name(std::move(n)), text(std::move(t)) {}

    Element& add(Element child) {
        children.push_back(std::move(child));
        return children.back();
    }
    Element& add(std::string n, std::string t) { return add(Element(std::move(n), std::move(t))); }

    const Element* child(std::string_view n) const {
        for (const auto& c : children)
            if (c.name == n) return &c;
        return nullptr;
    }
};

inline void escape_into(std::string_view s, std::string& out) {
    for (unsigned char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "&#%u;", static_cast<unsigned>(c));
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
}

inline void write_into(const Element& e, std::string& out) {
    out += '<';
    out += e.name;
    out += '>';
    if (e.children.empty()) {
        escape_into(e.text, out);
    } else {
        for (const auto& c : e.children) write_into(c, out);
    }
    out += "</";
    out += e.name;
    out += '>';
}

inline std::string write(const Element& e) {
    std::string out;
    write_into(e, out);
    return out;
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    Element parse_document() {
        // UTF-8 BOM and a leading declaration are tolerated on input; the
        // canonical writer emits neither.
        if (s_.substr(pos_, 3) == "\xEF\xBB\xBF") pos_ += 3;
        skip_misc();
        if (pos_ < s_.size() && s_.compare(pos_, 2, "<?") == 0) {
            auto end = s_.find("?>", pos_);
            if (end == std::string_view::npos) fail("unterminated declaration");
            pos_ = end + 2;
        }
        skip_misc();
        Element root = parse_element();
        skip_misc();
        if (pos_ != s_.size()) fail("trailing content after document element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& why) const {
        throw Error(Errc::malformed_xml, why + " (offset " + std::to_string(pos_) + ")");
    }

    void skip_ws() {
        while (pos_ < s_.size() && is_ws(s_[pos_])) ++pos_;
    }

    void skip_misc() {
        for (;;) {
            skip_ws();
            if (s_.compare(pos_, 4, "<!--") == 0) {
                auto end = s_.find("-->", pos_ + 4);
                if (end == std::string_view::npos) fail("unterminated comment");
                pos_ = end + 3;
            } else {
                return;
            }
        }
    }

    static bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

    static bool name_start(char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
    }
    static bool name_char(char c) {
        return name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
    }

    std::string parse_name() {
        if (pos_ >= s_.size() || !name_start(s_[pos_])) fail("expected element name");
        size_t start = pos_;
        while (pos_ < s_.size() && name_char(s_[pos_])) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    Element parse_element() {
        if (pos_ >= s_.size() || s_[pos_] != '<') fail("expected '<'");
        ++pos_;
        Element e;
        e.name = parse_name();
        if (pos_ < s_.size() && is_ws(s_[pos_])) fail("attributes are not supported");
        if (s_.compare(pos_, 2, "/>") == 0) {
            pos_ += 2;
            return e;
        }
        if (pos_ >= s_.size() || s_[pos_] != '>') fail("expected '>'");
        ++pos_;
        parse_content(e);
        return e;
    }

    void parse_content(Element& e) {
        std::string text;
        bool text_significant = false;
        for (;;) {
            if (pos_ >= s_.size()) fail("unterminated element <" + e.name + ">");
            if (s_[pos_] == '<') {
                if (s_.compare(pos_, 2, "</") == 0) {
                    pos_ += 2;
                    std::string close = parse_name();
                    if (close != e.name) fail("mismatched close tag </" + close + ">");
                    if (pos_ >= s_.size() || s_[pos_] != '>') fail("expected '>'");
                    ++pos_;
                    if (!e.children.empty() && text_significant)
                        fail("mixed text and child elements in <" + e.name + ">");
                    if (e.children.empty()) e.text = std::move(text);
                    return;
                }
                if (s_.compare(pos_, 4, "<!--") == 0) {
                    auto end = s_.find("-->", pos_ + 4);
                    if (end == std::string_view::npos) fail("unterminated comment");
                    pos_ = end + 3;
                    continue;
                }
                if (text_significant) fail("mixed text and child elements in <" + e.name + ">");
                e.children.push_back(parse_element());
                continue;
            }
            char c = s_[pos_];
            if (c == '&') {
                text += parse_entity();
                text_significant = true;
                continue;
            }
            if (!is_ws(c)) text_significant = true;
            text += c;
            ++pos_;
        }
    }

    std::string parse_entity() {
        auto semi = s_.find(';', pos_);
        if (semi == std::string_view::npos || semi - pos_ > 12) fail("unterminated entity");
        std::string_view body = s_.substr(pos_ + 1, semi - pos_ - 1);
        pos_ = semi + 1;
        if (body == "amp") return "&";
        if (body == "lt") return "<";
        if (body == "gt") return ">";
        if (body == "quot") return "\"";
        if (body == "apos") return "'";
        if (!body.empty() && body[0] == '#') {
            unsigned long v = 0;
            bool ok = false;
            if (body.size() > 1 && (body[1] == 'x' || body[1] == 'X')) {
                for (char h : body.substr(2)) {
                    int d = h >= '0' && h <= '9'   ? h - '0'
                            : h >= 'a' && h <= 'f' ? h - 'a' + 10
                            : h >= 'A' && h <= 'F' ? h - 'A' + 10
                                                   : -1;
                    if (d < 0) { ok = false; break; }
                    v = v * 16 + static_cast<unsigned long>(d);
                    ok = true;
                }
            } else {
                for (char d : body.substr(1)) {
                    if (d < '0' || d > '9') { ok = false; break; }
                    v = v * 10 + static_cast<unsigned long>(d - '0');
                    ok = true;
                }
            }
            if (!ok || v > 0x10FFFF) fail("bad character reference");
            // Encode the code point back to UTF-8.
            std::string out;
            if (v < 0x80) {
                out += static_cast<char>(v);
            } else if (v < 0x800) {
                out += static_cast<char>(0xC0 | (v >> 6));
                out += static_cast<char>(0x80 | (v & 0x3F));
            } else if (v < 0x10000) {
                out += static_cast<char>(0xE0 | (v >> 12));
                out += static_cast<char>(0x80 | ((v >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (v & 0x3F));
            } else {
                out += static_cast<char>(0xF0 | (v >> 18));
                out += static_cast<char>(0x80 | ((v >> 12) & 0x3F));
                out += static_cast<char>(0x80 | ((v >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (v & 0x3F));
            }
            return out;
        }
        fail("unknown entity &" + std::string(body) + ";");
    }

    std::string_view s_;
    size_t pos_ = 0;
};

}  // namespace detail

inline Element parse(std::string_view s) { return detail::Parser(s).parse_document(); }

}  // namespace ppco::xml
