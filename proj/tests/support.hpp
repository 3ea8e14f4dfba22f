#pragma once

// Shared test machinery: fixture paths, randomized DOM/selector/manifest
// generators, and independent oracles kept deliberately separate from the
// library's implementation paths.

#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "agentperm/html.hpp"
#include "agentperm/manifest.hpp"
#include "agentperm/selector.hpp"

namespace testsupport {

using namespace agentperm;

inline std::string fixture(const std::string& name) {
    return std::string(FIXTURES_DIR) + "/" + name;
}

inline std::string read_fixture(const std::string& name) {
    std::ifstream in(fixture(name), std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ── Random DOM trees ─────────────────────────────────────────────────────────

struct RandomDom {
    HtmlDocument                 doc;
    std::vector<const HtmlNode*> elements;  // document order, including html/body
};

inline HtmlNode* add_child(HtmlNode* parent, std::string tag) {
    auto node = std::make_unique<HtmlNode>();
    node->tag = std::move(tag);
    node->parent = parent;
    parent->children.push_back(std::move(node));
    return parent->children.back().get();
}

inline RandomDom random_dom(std::mt19937& rng, int max_nodes) {
    static const char* kTags[] = {"div", "span", "a", "p", "ul", "li", "form", "input", "button", "nav"};
    static const char* kClasses[] = {"alpha", "beta", "gamma", "no-agent", "btn", "nav-item"};
    static const char* kAttrNames[] = {"href", "type", "name", "data-x"};
    static const char* kAttrValues[] = {"one", "two", "submit", "password", "/a/b", "xy"};

    RandomDom out;
    out.doc.root = std::make_unique<HtmlNode>();
    out.doc.root->tag = "html";
    HtmlNode* body = add_child(out.doc.root.get(), "body");

    std::uniform_int_distribution<int> count(1, max_nodes);
    int n = count(rng);
    std::vector<HtmlNode*> pool{body};
    int id_counter = 0;
    for (int i = 0; i < n; ++i) {
        HtmlNode* parent = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        HtmlNode* el = add_child(parent, kTags[std::uniform_int_distribution<int>(0, 9)(rng)]);
        if (std::uniform_int_distribution<int>(0, 4)(rng) == 0)
            el->attributes.emplace_back("id", "id" + std::to_string(id_counter++));
        int nclasses = std::uniform_int_distribution<int>(0, 2)(rng);
        if (nclasses) {
            std::string cls;
            for (int c = 0; c < nclasses; ++c) {
                if (c) cls += " ";
                cls += kClasses[std::uniform_int_distribution<int>(0, 5)(rng)];
            }
            el->attributes.emplace_back("class", cls);
        }
        if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
            el->attributes.emplace_back(
                kAttrNames[std::uniform_int_distribution<int>(0, 3)(rng)],
                kAttrValues[std::uniform_int_distribution<int>(0, 5)(rng)]);
        }
        pool.push_back(el);
    }
    out.elements = all_elements(out.doc);
    return out;
}

// ── Random selectors from the subset grammar ─────────────────────────────────

inline CompoundSelector random_compound(std::mt19937& rng) {
    static const char* kTags[] = {"div", "span", "a", "p", "ul", "li", "form", "input", "button", "nav"};
    static const char* kClasses[] = {"alpha", "beta", "gamma", "no-agent", "btn", "nav-item"};
    static const char* kAttrNames[] = {"href", "type", "name", "data-x"};
    static const char* kAttrValues[] = {"one", "two", "submit", "password", "xy"};

    CompoundSelector c;
    bool any = false;
    int type_pick = std::uniform_int_distribution<int>(0, 3)(rng);
    if (type_pick == 0) {
        c.universal = true;
        any = true;
    } else if (type_pick <= 2) {
        c.type = kTags[std::uniform_int_distribution<int>(0, 9)(rng)];
        any = true;
    }
    if (std::uniform_int_distribution<int>(0, 5)(rng) == 0) {
        c.id = "id" + std::to_string(std::uniform_int_distribution<int>(0, 6)(rng));
        any = true;
    }
    int nclasses = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int i = 0; i < nclasses; ++i) {
        c.classes.push_back(kClasses[std::uniform_int_distribution<int>(0, 5)(rng)]);
        any = true;
    }
    if (std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
        AttrPredicate p;
        p.name = kAttrNames[std::uniform_int_distribution<int>(0, 3)(rng)];
        switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
            case 0: p.op = AttrPredicate::Op::Exists; break;
            case 1: p.op = AttrPredicate::Op::Equals; break;
            case 2: p.op = AttrPredicate::Op::Prefix; break;
            case 3: p.op = AttrPredicate::Op::Suffix; break;
            default: p.op = AttrPredicate::Op::Substring; break;
        }
        if (p.op != AttrPredicate::Op::Exists)
            p.value = kAttrValues[std::uniform_int_distribution<int>(0, 4)(rng)];
        c.attrs.push_back(p);
        any = true;
    }
    if (!any) c.universal = true;
    return c;
}

inline SelectorAst random_selector(std::mt19937& rng) {
    SelectorAst ast;
    int nalts = std::uniform_int_distribution<int>(1, 2)(rng);
    for (int a = 0; a < nalts; ++a) {
        ComplexSelector alt;
        int ncomp = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int i = 0; i < ncomp; ++i) {
            alt.compounds.push_back(random_compound(rng));
            if (i) alt.combinators.push_back(std::uniform_int_distribution<int>(0, 1)(rng)
                                                 ? Combinator::Child
                                                 : Combinator::Descendant);
        }
        ast.alternatives.push_back(std::move(alt));
    }
    return ast;
}

// ── Independent match oracle over the live tree ──────────────────────────────
// Applies the CSS definition directly to HtmlNode parent pointers, never
// touching ElementDescriptor or the library matcher internals.

inline bool oracle_compound(const CompoundSelector& c, const HtmlNode& el) {
    if (c.type && el.tag != *c.type) return false;
    const std::string* id = el.attr("id");
    if (c.id && (!id || *id != *c.id)) return false;
    for (const auto& cls : c.classes) {
        const std::string* attr = el.attr("class");
        if (!attr) return false;
        std::istringstream is(*attr);
        std::string tok;
        bool found = false;
        while (is >> tok)
            if (tok == cls) found = true;
        if (!found) return false;
    }
    for (const auto& p : c.attrs) {
        const std::string* v = el.attr(p.name);
        if (!v) return false;
        switch (p.op) {
            case AttrPredicate::Op::Exists: break;
            case AttrPredicate::Op::Equals:
                if (*v != p.value) return false;
                break;
            case AttrPredicate::Op::Prefix:
                if (p.value.empty() || v->rfind(p.value, 0) != 0) return false;
                break;
            case AttrPredicate::Op::Suffix:
                if (p.value.empty() || v->size() < p.value.size() ||
                    v->compare(v->size() - p.value.size(), p.value.size(), p.value) != 0)
                    return false;
                break;
            case AttrPredicate::Op::Substring:
                if (p.value.empty() || v->find(p.value) == std::string::npos) return false;
                break;
        }
    }
    return true;
}

inline bool oracle_chain(const ComplexSelector& alt, std::size_t idx, const HtmlNode* node) {
    // compounds[idx] already needs a home among node's ancestors per the
    // combinator to its right.
    const HtmlNode* parent = node->parent;
    if (alt.combinators[idx] == Combinator::Child) {
        if (!parent || !parent->is_element()) return false;
        if (!oracle_compound(alt.compounds[idx], *parent)) return false;
        return idx == 0 || oracle_chain(alt, idx - 1, parent);
    }
    for (const HtmlNode* anc = parent; anc && anc->is_element(); anc = anc->parent) {
        if (oracle_compound(alt.compounds[idx], *anc)) {
            if (idx == 0 || oracle_chain(alt, idx - 1, anc)) return true;
        }
    }
    return false;
}

inline bool oracle_matches(const SelectorAst& ast, const HtmlNode& el) {
    for (const auto& alt : ast.alternatives) {
        if (!oracle_compound(alt.compounds.back(), el)) continue;
        if (alt.compounds.size() == 1 || oracle_chain(alt, alt.compounds.size() - 2, &el))
            return true;
    }
    return false;
}

// Independent specificity count straight off the AST.
inline Specificity oracle_specificity(const ComplexSelector& alt) {
    Specificity s;
    for (const auto& c : alt.compounds) {
        if (c.id) ++s.ids;
        s.classes += static_cast<int>(c.classes.size() + c.attrs.size());
        if (c.type) ++s.types;
    }
    return s;
}

// ── Random valid manifest documents ──────────────────────────────────────────

inline json random_manifest_json(std::mt19937& rng) {
    auto chance = [&](int denom) { return std::uniform_int_distribution<int>(0, denom - 1)(rng) == 0; };
    static const char* kVerbs[] = {"read_content", "click_element", "fill_input", "submit_form",
                                   "follow_link", "play_media", "download_file", "hover_element",
                                   "scroll_page"};
    static const char* kDirectives[] = {"MUST", "MUST NOT", "SHOULD", "SHOULD NOT", "MAY"};

    json meta{{"schema_version",
               std::to_string(std::uniform_int_distribution<int>(0, 3)(rng)) + "." +
                   std::to_string(std::uniform_int_distribution<int>(0, 9)(rng))}};
    if (chance(2)) meta["last_updated"] = "2025-06-01T12:30:00Z";
    if (chance(2)) meta["author"] = "fixture author";
    if (chance(3)) meta["custom_note"] = "extension field";

    json rules = json::array();
    int nrules = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int i = 0; i < nrules; ++i) {
        json rule{{"verb", kVerbs[std::uniform_int_distribution<int>(0, 8)(rng)]},
                  {"selector", to_string(random_selector(rng))},
                  {"allowed", chance(2)}};
        if (chance(2)) {
            json mods = json::object();
            if (chance(2)) mods["human_in_the_loop"] = chance(2);
            if (chance(2))
                mods["rate_limit"] = {
                    {"max_requests", std::uniform_int_distribution<int>(1, 50)(rng)},
                    {"window_seconds", std::uniform_int_distribution<int>(1, 7200)(rng)}};
            if (chance(3))
                mods["max_concurrent"] = std::uniform_int_distribution<int>(1, 8)(rng);
            if (chance(4))
                mods["time_window"] = {{"start", "09:00"}, {"end", "17:30"}, {"timezone", "UTC"}};
            if (chance(4)) mods["vendor_extension"] = "opaque";
            if (mods.empty()) mods["human_in_the_loop"] = true;
            rule["modifiers"] = std::move(mods);
        }
        rules.push_back(std::move(rule));
    }

    json doc{{"metadata", std::move(meta)}, {"resource_rules", std::move(rules)}};

    if (chance(2)) {
        json gs = json::array();
        int n = std::uniform_int_distribution<int>(1, 3)(rng);
        for (int i = 0; i < n; ++i) {
            json g{{"directive", kDirectives[std::uniform_int_distribution<int>(0, 4)(rng)]},
                   {"description", "guideline " + std::to_string(i)}};
            if (chance(3)) g["exceptions"] = "exception text";
            gs.push_back(std::move(g));
        }
        doc["action_guidelines"] = std::move(gs);
    }
    if (chance(2)) {
        json apis = json::array();
        apis.push_back({{"type", chance(2) ? "openapi" : "mcp"},
                        {"endpoint", "https://api.example.com/spec.yaml"},
                        {"description", "api"}});
        doc["api"] = std::move(apis);
    }
    if (chance(3)) doc["x_future_section"] = json::array({1, 2, 3});
    return doc;
}

}  // namespace testsupport
