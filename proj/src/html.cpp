#include "agentperm/html.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <sstream>

namespace agentperm {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_void_element(const std::string& tag) {
    static const std::array<const char*, 14> kVoid = {"area", "base", "br",     "col",  "embed",
                                                      "hr",   "img",  "input",  "link", "meta",
                                                      "param", "source", "track", "wbr"};
    return std::find(kVoid.begin(), kVoid.end(), tag) != kVoid.end();
}

std::string decode_entities(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size();) {
        if (in[i] != '&') {
            out.push_back(in[i++]);
            continue;
        }
        auto semi = in.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back(in[i++]);
            continue;
        }
        std::string_view ent = in.substr(i + 1, semi - i - 1);
        if (ent == "amp") out.push_back('&');
        else if (ent == "lt") out.push_back('<');
        else if (ent == "gt") out.push_back('>');
        else if (ent == "quot") out.push_back('"');
        else if (ent == "apos" || ent == "#39") out.push_back('\'');
        else if (ent == "nbsp") out.push_back(' ');
        else if (!ent.empty() && ent[0] == '#') {
            long code = std::strtol(std::string(ent.substr(1)).c_str(), nullptr, 10);
            if (code > 0 && code < 128) out.push_back(static_cast<char>(code));
            // non-ASCII references passed through verbatim
            else { out.append(in.substr(i, semi - i + 1)); }
        } else {
            out.append(in.substr(i, semi - i + 1));
            i = semi + 1;
            continue;
        }
        i = semi + 1;
    }
    return out;
}

class HtmlParser {
public:
    explicit HtmlParser(std::string_view input) : s_(input) {}

    HtmlDocument parse() {
        auto virtual_root = std::make_unique<HtmlNode>();
        virtual_root->tag = "#root";
        stack_.push_back(virtual_root.get());

        while (pos_ < s_.size()) {
            if (s_[pos_] == '<')
                parse_tag();
            else
                parse_text();
        }

        return normalize(std::move(virtual_root));
    }

private:
    void parse_text() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != '<') ++pos_;
        std::string_view raw = s_.substr(start, pos_ - start);
        bool all_ws = std::all_of(raw.begin(), raw.end(), [](char c) {
            return std::isspace(static_cast<unsigned char>(c));
        });
        if (all_ws) return;
        auto node = std::make_unique<HtmlNode>();
        node->kind = HtmlNode::Kind::Text;
        node->text = decode_entities(raw);
        append(std::move(node));
    }

    void parse_tag() {
        // pos_ at '<'
        if (s_.compare(pos_, 4, "<!--") == 0) {
            auto end = s_.find("-->", pos_ + 4);
            pos_ = end == std::string_view::npos ? s_.size() : end + 3;
            return;
        }
        if (pos_ + 1 < s_.size() && (s_[pos_ + 1] == '!' || s_[pos_ + 1] == '?')) {
            auto end = s_.find('>', pos_);
            pos_ = end == std::string_view::npos ? s_.size() : end + 1;
            return;
        }
        if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '/') {
            pos_ += 2;
            std::string tag = to_lower(read_name());
            skip_to_gt();
            close(tag);
            return;
        }
        if (pos_ + 1 >= s_.size() || !std::isalpha(static_cast<unsigned char>(s_[pos_ + 1]))) {
            // stray '<' treated as text
            auto node = std::make_unique<HtmlNode>();
            node->kind = HtmlNode::Kind::Text;
            node->text = "<";
            append(std::move(node));
            ++pos_;
            return;
        }
        ++pos_;
        auto node = std::make_unique<HtmlNode>();
        node->tag = to_lower(read_name());
        bool self_closing = parse_attributes(*node);
        std::string tag = node->tag;
        HtmlNode* raw = node.get();
        append(std::move(node));
        if (self_closing || is_void_element(tag)) return;
        if (tag == "script" || tag == "style") {
            skip_raw_text(tag);
            return;
        }
        stack_.push_back(raw);
    }

    bool parse_attributes(HtmlNode& node) {
        bool self_closing = false;
        for (;;) {
            skip_ws();
            if (pos_ >= s_.size()) break;
            char c = s_[pos_];
            if (c == '>') {
                ++pos_;
                break;
            }
            if (c == '/') {
                ++pos_;
                self_closing = true;
                continue;
            }
            std::string name = to_lower(read_attr_name());
            if (name.empty()) {
                ++pos_;  // skip junk
                continue;
            }
            std::string value;
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == '=') {
                ++pos_;
                skip_ws();
                value = read_attr_value();
            }
            bool dup = false;
            for (auto& [n, v] : node.attributes)
                if (n == name) dup = true;
            if (!dup) node.attributes.emplace_back(name, decode_entities(value));
        }
        return self_closing;
    }

    std::string read_name() {
        std::string out;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-')) {
            out.push_back(s_[pos_++]);
        }
        return out;
    }

    std::string read_attr_name() {
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != '=' && s_[pos_] != '>' && s_[pos_] != '/' &&
               !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            out.push_back(s_[pos_++]);
        }
        return out;
    }

    std::string read_attr_value() {
        if (pos_ >= s_.size()) return "";
        char q = s_[pos_];
        std::string out;
        if (q == '"' || q == '\'') {
            ++pos_;
            while (pos_ < s_.size() && s_[pos_] != q) out.push_back(s_[pos_++]);
            if (pos_ < s_.size()) ++pos_;
        } else {
            while (pos_ < s_.size() && s_[pos_] != '>' &&
                   !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
                out.push_back(s_[pos_++]);
            }
        }
        return out;
    }

    void skip_raw_text(const std::string& tag) {
        std::string close_tag = "</" + tag;
        std::size_t i = pos_;
        while (i < s_.size()) {
            auto cand = s_.find('<', i);
            if (cand == std::string_view::npos) break;
            if (s_.size() - cand >= close_tag.size()) {
                std::string got = to_lower(std::string(s_.substr(cand, close_tag.size())));
                if (got == close_tag) {
                    pos_ = cand;
                    auto gt = s_.find('>', cand);
                    pos_ = gt == std::string_view::npos ? s_.size() : gt + 1;
                    return;
                }
            }
            i = cand + 1;
        }
        pos_ = s_.size();
    }

    void close(const std::string& tag) {
        for (std::size_t i = stack_.size(); i-- > 1;) {
            if (stack_[i]->tag == tag) {
                stack_.resize(i);
                return;
            }
        }
        // unmatched close tag: ignored
    }

    void append(std::unique_ptr<HtmlNode> node) {
        node->parent = stack_.back();
        stack_.back()->children.push_back(std::move(node));
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    void skip_to_gt() {
        auto end = s_.find('>', pos_);
        pos_ = end == std::string_view::npos ? s_.size() : end + 1;
    }

    // Ensure the document root is an <html> element with content under it.
    HtmlDocument normalize(std::unique_ptr<HtmlNode> virtual_root) {
        HtmlDocument doc;
        // single top-level <html>: adopt it directly
        HtmlNode* only_html = nullptr;
        int element_count = 0;
        for (auto& child : virtual_root->children) {
            if (child->is_element()) {
                ++element_count;
                if (child->tag == "html") only_html = child.get();
            }
        }
        if (only_html && element_count == 1) {
            for (auto& child : virtual_root->children) {
                if (child.get() == only_html) {
                    doc.root = std::move(child);
                    doc.root->parent = nullptr;
                    return doc;
                }
            }
        }
        auto html = std::make_unique<HtmlNode>();
        html->tag = "html";
        auto body = std::make_unique<HtmlNode>();
        body->tag = "body";
        body->parent = html.get();
        for (auto& child : virtual_root->children) {
            child->parent = body.get();
            body->children.push_back(std::move(child));
        }
        html->children.push_back(std::move(body));
        doc.root = std::move(html);
        return doc;
    }

    std::string_view       s_;
    std::size_t            pos_ = 0;
    std::vector<HtmlNode*> stack_;
};

void walk(const HtmlNode& node, const std::function<void(const HtmlNode&)>& fn) {
    if (node.is_element()) fn(node);
    for (const auto& child : node.children) walk(*child, fn);
}

}  // namespace

const std::string* HtmlNode::attr(std::string_view name) const {
    for (const auto& [n, v] : attributes)
        if (n == name) return &v;
    return nullptr;
}

HtmlDocument parse_html(std::string_view input) { return HtmlParser(input).parse(); }

void for_each_element(const HtmlDocument& doc, const std::function<void(const HtmlNode&)>& fn) {
    if (doc.root) walk(*doc.root, fn);
}

std::vector<const HtmlNode*> all_elements(const HtmlDocument& doc) {
    std::vector<const HtmlNode*> out;
    for_each_element(doc, [&](const HtmlNode& n) { out.push_back(&n); });
    return out;
}

ElementSurface surface_of(const HtmlNode& el) {
    ElementSurface s;
    s.tag = el.tag;
    for (const auto& [name, value] : el.attributes) s.attributes.emplace(name, value);
    if (const std::string* id = el.attr("id"); id && !id->empty()) s.id = *id;
    if (const std::string* cls = el.attr("class")) {
        std::istringstream is(*cls);
        std::string tok;
        while (is >> tok) s.classes.insert(tok);
    }
    return s;
}

ElementDescriptor describe(const HtmlNode& el) {
    ElementDescriptor d;
    static_cast<ElementSurface&>(d) = surface_of(el);
    for (const HtmlNode* p = el.parent; p != nullptr; p = p->parent) {
        if (p->is_element() && p->tag != "#root") d.ancestors.push_back(surface_of(*p));
    }
    return d;
}

std::string own_text(const HtmlNode& el) {
    std::string raw;
    for (const auto& child : el.children) {
        if (child->kind == HtmlNode::Kind::Text) raw += child->text;
    }
    // collapse whitespace runs, trim
    std::string out;
    bool pending_space = false;
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

std::vector<const HtmlNode*> query_all(const HtmlDocument& doc, const SelectorAst& sel) {
    std::vector<const HtmlNode*> out;
    for_each_element(doc, [&](const HtmlNode& n) {
        if (matches(sel, describe(n))) out.push_back(&n);
    });
    return out;
}

const HtmlNode* query_first(const HtmlDocument& doc, const SelectorAst& sel) {
    auto all = query_all(doc, sel);
    return all.empty() ? nullptr : all.front();
}

ElementDescriptor element_from_html(std::string_view document, const std::string& locator,
                                    bool* ambiguous) {
    SelectorAst sel = parse_selector(locator);
    HtmlDocument doc = parse_html(document);
    auto hits = query_all(doc, sel);
    if (hits.empty()) throw LookupError("no element matches locator '" + locator + "'");
    if (ambiguous) *ambiguous = hits.size() > 1;
    return describe(*hits.front());
}

}  // namespace agentperm
