#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agentperm/selector.hpp"

namespace agentperm {

// Tolerant, non-validating HTML tree. Enough fidelity for selector matching
// and link extraction: elements, attributes, text; comments/doctype/scripts
// skipped. Documents without an <html> element are wrapped in implied
// html > body.
struct HtmlNode {
    enum class Kind { Element, Text };

    Kind                                   kind = Kind::Element;
    std::string                            tag;   // lowercase, Element only
    std::vector<std::pair<std::string, std::string>> attributes;
    std::string                            text;  // Text only
    std::vector<std::unique_ptr<HtmlNode>> children;
    HtmlNode*                              parent = nullptr;

    bool is_element() const { return kind == Kind::Element; }
    const std::string* attr(std::string_view name) const;
};

struct HtmlDocument {
    std::unique_ptr<HtmlNode> root;  // the <html> element
};

struct HtmlParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

HtmlDocument parse_html(std::string_view input);

// Document-order walk over element nodes.
void for_each_element(const HtmlDocument& doc, const std::function<void(const HtmlNode&)>& fn);
std::vector<const HtmlNode*> all_elements(const HtmlDocument& doc);

ElementSurface    surface_of(const HtmlNode& el);
ElementDescriptor describe(const HtmlNode& el);

// Concatenated direct text children, whitespace-collapsed.
std::string own_text(const HtmlNode& el);

std::vector<const HtmlNode*> query_all(const HtmlDocument& doc, const SelectorAst& sel);
const HtmlNode*              query_first(const HtmlDocument& doc, const SelectorAst& sel);

struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// First match in document order; `ambiguous`, when given, is set when more
// than one element matched. Throws LookupError on no match, SelectorError on
// a bad locator.
ElementDescriptor element_from_html(std::string_view document, const std::string& locator,
                                    bool* ambiguous = nullptr);

}  // namespace agentperm
