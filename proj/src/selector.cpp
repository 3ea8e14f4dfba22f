#include "agentperm/selector.hpp"

#include <cctype>
#include <sstream>

namespace agentperm {

namespace {

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
}

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

class Parser {
public:
    explicit Parser(const std::string& raw) : s_(raw) {}

    SelectorAst parse() {
        SelectorAst ast;
        skip_ws();
        if (eof()) throw SelectorError(SelectorError::Kind::Empty, 0, "empty selector");
        ast.alternatives.push_back(parse_alternative());
        skip_ws();
        while (!eof()) {
            expect(',');
            skip_ws();
            ast.alternatives.push_back(parse_alternative());
            skip_ws();
        }
        return ast;
    }

private:
    ComplexSelector parse_alternative() {
        ComplexSelector alt;
        alt.compounds.push_back(parse_compound());
        for (;;) {
            std::size_t before = pos_;
            bool saw_ws = skip_ws();
            if (eof() || peek() == ',') {
                pos_ = before;
                break;
            }
            if (peek() == '>') {
                ++pos_;
                skip_ws();
                alt.combinators.push_back(Combinator::Child);
            } else if (saw_ws) {
                alt.combinators.push_back(Combinator::Descendant);
            } else {
                fail("unexpected character");
            }
            alt.compounds.push_back(parse_compound());
        }
        return alt;
    }

    CompoundSelector parse_compound() {
        CompoundSelector c;
        bool any = false;
        if (!eof() && peek() == '*') {
            ++pos_;
            c.universal = true;
            any = true;
        } else if (!eof() && (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_')) {
            c.type = to_lower(ident());
            any = true;
        }
        for (;;) {
            if (eof()) break;
            char ch = peek();
            if (ch == '#') {
                ++pos_;
                if (c.id) fail("multiple ids in one compound");
                c.id = ident();
                any = true;
            } else if (ch == '.') {
                ++pos_;
                c.classes.push_back(ident());
                any = true;
            } else if (ch == '[') {
                ++pos_;
                c.attrs.push_back(parse_attr());
                any = true;
            } else if (ch == ':') {
                throw SelectorError(SelectorError::Kind::UnsupportedFeature, pos_,
                                    "pseudo-classes/elements are not supported");
            } else if (ch == '~' || ch == '+' || ch == '|') {
                throw SelectorError(SelectorError::Kind::UnsupportedFeature, pos_,
                                    std::string("unsupported combinator '") + ch + "'");
            } else {
                break;
            }
        }
        if (!any) fail("expected a simple selector");
        return c;
    }

    AttrPredicate parse_attr() {
        AttrPredicate p;
        skip_ws();
        p.name = to_lower(ident());
        skip_ws();
        if (!eof() && peek() == ']') {
            ++pos_;
            p.op = AttrPredicate::Op::Exists;
            return p;
        }
        if (eof()) fail("unterminated attribute selector");
        char ch = peek();
        if (ch == '=') {
            p.op = AttrPredicate::Op::Equals;
            ++pos_;
        } else if (ch == '^' || ch == '$' || ch == '*') {
            ++pos_;
            expect('=');
            p.op = ch == '^'   ? AttrPredicate::Op::Prefix
                   : ch == '$' ? AttrPredicate::Op::Suffix
                               : AttrPredicate::Op::Substring;
        } else if (ch == '~') {
            throw SelectorError(SelectorError::Kind::UnsupportedFeature, pos_,
                                "~= attribute matching is not supported");
        } else {
            fail("expected ']' or an attribute operator");
        }
        skip_ws();
        p.value = attr_value();
        skip_ws();
        expect(']');
        return p;
    }

    std::string attr_value() {
        if (eof()) fail("expected attribute value");
        char q = peek();
        if (q == '"' || q == '\'') {
            ++pos_;
            std::string out;
            while (!eof() && peek() != q) out.push_back(s_[pos_++]);
            if (eof()) fail("unterminated quoted value");
            ++pos_;
            return out;
        }
        std::string out;
        while (!eof() && is_ident_char(peek())) out.push_back(s_[pos_++]);
        if (out.empty()) fail("expected attribute value");
        return out;
    }

    std::string ident() {
        std::string out;
        if (eof() || !is_ident_char(peek())) fail("expected identifier");
        while (!eof() && is_ident_char(peek())) out.push_back(s_[pos_++]);
        return out;
    }

    bool skip_ws() {
        bool any = false;
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) {
            ++pos_;
            any = true;
        }
        return any;
    }

    void expect(char c) {
        if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw SelectorError(SelectorError::Kind::Syntax, pos_,
                            msg + " at offset " + std::to_string(pos_));
    }

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return s_[pos_]; }

    const std::string& s_;
    std::size_t        pos_ = 0;
};

bool attr_matches(const AttrPredicate& p, const std::map<std::string, std::string>& attrs) {
    auto it = attrs.find(p.name);
    if (it == attrs.end()) return false;
    const std::string& v = it->second;
    switch (p.op) {
        case AttrPredicate::Op::Exists:
            return true;
        case AttrPredicate::Op::Equals:
            return v == p.value;
        case AttrPredicate::Op::Prefix:
            return !p.value.empty() && v.rfind(p.value, 0) == 0;
        case AttrPredicate::Op::Suffix:
            return !p.value.empty() && v.size() >= p.value.size() &&
                   v.compare(v.size() - p.value.size(), p.value.size(), p.value) == 0;
        case AttrPredicate::Op::Substring:
            return !p.value.empty() && v.find(p.value) != std::string::npos;
    }
    return false;
}

// Right-to-left chain match. `idx` indexes alt.compounds; `min_anc` is the
// shallowest ancestor position the next compound may occupy (0 = parent).
bool chain_matches(const ComplexSelector& alt, std::size_t idx, const ElementDescriptor& el,
                   std::size_t min_anc) {
    // idx is the compound to the left of an already-matched one.
    Combinator comb = alt.combinators[idx];  // between compounds[idx] and [idx+1]
    const CompoundSelector& c = alt.compounds[idx];
    if (comb == Combinator::Child) {
        if (min_anc >= el.ancestors.size()) return false;
        if (!matches(c, el.ancestors[min_anc])) return false;
        if (idx == 0) return true;
        return chain_matches(alt, idx - 1, el, min_anc + 1);
    }
    for (std::size_t a = min_anc; a < el.ancestors.size(); ++a) {
        if (!matches(c, el.ancestors[a])) continue;
        if (idx == 0) return true;
        if (chain_matches(alt, idx - 1, el, a + 1)) return true;
    }
    return false;
}

bool alt_matches(const ComplexSelector& alt, const ElementDescriptor& el) {
    if (!matches(alt.compounds.back(), el)) return false;
    if (alt.compounds.size() == 1) return true;
    return chain_matches(alt, alt.compounds.size() - 2, el, 0);
}

}  // namespace

SelectorAst parse_selector(const std::string& raw) { return Parser(raw).parse(); }

bool matches(const CompoundSelector& c, const ElementSurface& el) {
    if (c.type && *c.type != el.tag) return false;
    if (c.id && (!el.id || *el.id != *c.id)) return false;
    for (const auto& cls : c.classes)
        if (!el.classes.count(cls)) return false;
    for (const auto& p : c.attrs)
        if (!attr_matches(p, el.attributes)) return false;
    return true;
}

bool matches(const SelectorAst& ast, const ElementDescriptor& el) {
    for (const auto& alt : ast.alternatives)
        if (alt_matches(alt, el)) return true;
    return false;
}

std::optional<Specificity> match_specificity(const SelectorAst& ast, const ElementDescriptor& el) {
    std::optional<Specificity> best;
    for (const auto& alt : ast.alternatives) {
        if (!alt_matches(alt, el)) continue;
        Specificity s = specificity(alt);
        if (!best || s > *best) best = s;
    }
    return best;
}

Specificity specificity(const CompoundSelector& c) {
    Specificity s;
    if (c.id) s.ids = 1;
    s.classes = static_cast<int>(c.classes.size() + c.attrs.size());
    if (c.type) s.types = 1;
    return s;
}

Specificity specificity(const ComplexSelector& alt) {
    Specificity s;
    for (const auto& c : alt.compounds) {
        Specificity cs = specificity(c);
        s.ids += cs.ids;
        s.classes += cs.classes;
        s.types += cs.types;
    }
    return s;
}

Specificity specificity(const SelectorAst& ast) {
    Specificity best;
    for (const auto& alt : ast.alternatives) {
        Specificity s = specificity(alt);
        if (s > best) best = s;
    }
    return best;
}

std::string to_string(const CompoundSelector& c) {
    std::ostringstream os;
    if (c.type)
        os << *c.type;
    else if (c.universal)
        os << '*';
    if (c.id) os << '#' << *c.id;
    for (const auto& cls : c.classes) os << '.' << cls;
    for (const auto& p : c.attrs) {
        os << '[' << p.name;
        if (p.op != AttrPredicate::Op::Exists) {
            switch (p.op) {
                case AttrPredicate::Op::Equals:    os << '='; break;
                case AttrPredicate::Op::Prefix:    os << "^="; break;
                case AttrPredicate::Op::Suffix:    os << "$="; break;
                case AttrPredicate::Op::Substring: os << "*="; break;
                default: break;
            }
            bool plain = !p.value.empty();
            for (char ch : p.value)
                if (!is_ident_char(ch)) plain = false;
            if (plain)
                os << p.value;
            else
                os << '"' << p.value << '"';
        }
        os << ']';
    }
    return os.str();
}

std::string to_string(const ComplexSelector& alt) {
    std::ostringstream os;
    for (std::size_t i = 0; i < alt.compounds.size(); ++i) {
        if (i > 0) os << (alt.combinators[i - 1] == Combinator::Child ? " > " : " ");
        os << to_string(alt.compounds[i]);
    }
    return os.str();
}

std::string to_string(const SelectorAst& ast) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ast.alternatives.size(); ++i) {
        if (i > 0) os << ", ";
        os << to_string(ast.alternatives[i]);
    }
    return os.str();
}

}  // namespace agentperm
