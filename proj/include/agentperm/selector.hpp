#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace agentperm {

// CSS selector subset: type, universal, #id, .class, [attr] with
// exists/=/^=/$=/*=, descendant and child combinators, comma grouping.
// Pseudo-classes, sibling combinators, and namespaces are rejected.

struct AttrPredicate {
    enum class Op { Exists, Equals, Prefix, Suffix, Substring };
    std::string name;  // lowercase
    Op          op = Op::Exists;
    std::string value;

    bool operator==(const AttrPredicate&) const = default;
};

struct CompoundSelector {
    std::optional<std::string> type;  // lowercase tag name; nullopt when absent
    bool universal = false;           // explicit '*'
    std::optional<std::string> id;
    std::vector<std::string>   classes;
    std::vector<AttrPredicate> attrs;

    bool operator==(const CompoundSelector&) const = default;
};

enum class Combinator { Descendant, Child };

// One comma-group alternative: compounds[0] C compounds[1] C ... compounds[n-1],
// with combinators.size() == compounds.size() - 1. Rightmost compound is the
// subject.
struct ComplexSelector {
    std::vector<CompoundSelector> compounds;
    std::vector<Combinator>       combinators;

    bool operator==(const ComplexSelector&) const = default;
};

struct SelectorAst {
    std::vector<ComplexSelector> alternatives;

    bool operator==(const SelectorAst&) const = default;
};

// CSS specificity triple, compared lexicographically.
struct Specificity {
    int ids = 0;      // a
    int classes = 0;  // b: classes + attribute predicates
    int types = 0;    // c

    auto operator<=>(const Specificity&) const = default;
};

struct SelectorError : std::runtime_error {
    enum class Kind { Empty, UnsupportedFeature, Syntax };
    Kind        kind;
    std::size_t position;  // byte offset into the raw selector

    SelectorError(Kind k, std::size_t pos, const std::string& msg)
        : std::runtime_error(msg), kind(k), position(pos) {}
};

// Snapshot of one DOM element without its context.
struct ElementSurface {
    std::string                        tag;  // lowercase
    std::optional<std::string>         id;
    std::set<std::string>              classes;
    std::map<std::string, std::string> attributes;  // names lowercase

    bool operator==(const ElementSurface&) const = default;
};

// Element plus its ancestor chain, parent first, root last. ancestors[0],
// when present, is the immediate parent.
struct ElementDescriptor : ElementSurface {
    std::vector<ElementSurface> ancestors;

    bool operator==(const ElementDescriptor&) const = default;
};

SelectorAst parse_selector(const std::string& raw);  // throws SelectorError

// Structural round-trip form of the AST (single spaces, unquoted attribute
// values where possible).
std::string to_string(const SelectorAst& ast);
std::string to_string(const ComplexSelector& alt);
std::string to_string(const CompoundSelector& c);

bool matches(const CompoundSelector& c, const ElementSurface& el);
bool matches(const SelectorAst& ast, const ElementDescriptor& el);

// Specificity of the best (highest) alternative that matches el, or nullopt
// when none does.
std::optional<Specificity> match_specificity(const SelectorAst& ast, const ElementDescriptor& el);

Specificity specificity(const CompoundSelector& c);
Specificity specificity(const ComplexSelector& alt);
// In isolation: maximum across alternatives.
Specificity specificity(const SelectorAst& ast);

}  // namespace agentperm
