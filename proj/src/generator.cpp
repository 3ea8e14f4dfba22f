#include "agentperm/generator.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace agentperm {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool is_url(const std::string& s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

bool ident_safe(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    return true;
}

ElementPredicate parse_predicate(const json& j, int idx) {
    ElementPredicate p;
    if (!j.is_object()) throw PolicyError("policy " + std::to_string(idx) + ": match must be an object");
    for (auto& [key, value] : j.items()) {
        if (key == "tag") {
            p.tag = to_lower(value.get<std::string>());
        } else if (key == "text_contains") {
            p.text_contains = value.get<std::string>();
        } else if (key == "attr") {
            if (!value.is_object() || !value.contains("name") || !value.contains("value"))
                throw PolicyError("policy " + std::to_string(idx) +
                                  ": attr needs name and value");
            p.attr = {to_lower(value["name"].get<std::string>()),
                      value["value"].get<std::string>()};
        } else if (key == "css") {
            p.css = value.get<std::string>();
            try {
                parse_selector(*p.css);
            } catch (const SelectorError& e) {
                throw PolicyError("policy " + std::to_string(idx) + ": bad css selector: " +
                                  e.what());
            }
        } else if (key == "any") {
            p.any = value.get<bool>();
        } else {
            throw PolicyError("policy " + std::to_string(idx) + ": unknown match key '" + key +
                              "'");
        }
    }
    if (!p.tag && !p.text_contains && !p.attr && !p.css && !p.any)
        throw PolicyError("policy " + std::to_string(idx) + ": match has no predicates");
    return p;
}

bool predicate_matches(const ElementPredicate& p, const HtmlNode& el,
                       const ElementDescriptor& desc) {
    if (p.tag && el.tag != *p.tag) return false;
    if (p.attr) {
        const std::string* v = el.attr(p.attr->first);
        if (!v || *v != p.attr->second) return false;
    }
    if (p.text_contains) {
        std::string text = to_lower(own_text(el));
        if (text.find(to_lower(*p.text_contains)) == std::string::npos) return false;
    }
    if (p.css) {
        SelectorAst sel = parse_selector(*p.css);  // validated at policy parse
        if (!matches(sel, desc)) return false;
    }
    return true;
}

std::size_t count_matches(const std::string& selector,
                          const std::vector<const CorpusDocument*>& docs,
                          const HtmlNode** only = nullptr) {
    SelectorAst sel;
    try {
        sel = parse_selector(selector);
    } catch (const SelectorError&) {
        return 0;
    }
    std::size_t n = 0;
    for (const CorpusDocument* d : docs) {
        for (const HtmlNode* hit : query_all(d->doc, sel)) {
            ++n;
            if (only) *only = hit;
        }
    }
    return n;
}

bool uniquely_selects(const std::string& selector, const HtmlNode& el,
                      const std::vector<const CorpusDocument*>& docs) {
    const HtmlNode* only = nullptr;
    return count_matches(selector, docs, &only) == 1 && only == &el;
}

// Candidate selectors in preference order for one element, uniqueness judged
// over `scope`.
std::optional<std::string> synthesize_in_scope(const HtmlNode& el,
                                               const std::vector<const CorpusDocument*>& scope) {
    ElementSurface s = surface_of(el);
    if (s.id && ident_safe(*s.id)) {
        std::string cand = "#" + *s.id;
        if (uniquely_selects(cand, el, scope)) return cand;
    }
    for (const auto& cls : s.classes) {
        if (!ident_safe(cls)) continue;
        std::string cand = s.tag + "." + cls;
        if (uniquely_selects(cand, el, scope)) return cand;
    }
    if (s.classes.size() > 1) {
        std::string cand = s.tag;
        bool ok = true;
        for (const auto& cls : s.classes) {
            if (!ident_safe(cls)) ok = false;
            cand += "." + cls;
        }
        if (ok && uniquely_selects(cand, el, scope)) return cand;
    }
    static const char* kStableAttrs[] = {"name", "type", "href", "action"};
    for (const char* attr : kStableAttrs) {
        const std::string* v = el.attr(attr);
        if (!v || v->empty() || v->find('"') != std::string::npos) continue;
        std::string value = ident_safe(*v) ? *v : "\"" + *v + "\"";
        std::string cand = s.tag + "[" + attr + "=" + value + "]";
        if (uniquely_selects(cand, el, scope)) return cand;
    }
    // structural path from the nearest uniquely selectable ancestor
    std::vector<const HtmlNode*> path{&el};
    for (const HtmlNode* anc = el.parent; anc != nullptr; anc = anc->parent) {
        if (!anc->is_element() || anc->tag == "#root") break;
        ElementSurface as = surface_of(*anc);
        std::optional<std::string> anchor;
        if (as.id && ident_safe(*as.id) && uniquely_selects("#" + *as.id, *anc, scope))
            anchor = "#" + *as.id;
        if (!anchor) {
            for (const auto& cls : as.classes) {
                if (!ident_safe(cls)) continue;
                std::string cand = as.tag + "." + cls;
                if (uniquely_selects(cand, *anc, scope)) {
                    anchor = cand;
                    break;
                }
            }
        }
        if (!anchor && uniquely_selects(as.tag, *anc, scope)) anchor = as.tag;
        if (anchor) {
            std::string cand = *anchor;
            for (auto it = path.rbegin(); it != path.rend(); ++it) {
                ElementSurface ps = surface_of(**it);
                std::string compound = ps.tag;
                if (ps.id && ident_safe(*ps.id)) compound += "#" + *ps.id;
                for (const auto& cls : ps.classes)
                    if (ident_safe(cls)) compound += "." + cls;
                cand += " > " + compound;
            }
            if (uniquely_selects(cand, el, scope)) return cand;
        }
        path.push_back(anc);
    }
    return std::nullopt;
}

// One selector covering the whole matched set exactly, when a single class or
// stable attribute does.
std::optional<std::string> shared_selector(const std::vector<const HtmlNode*>& els,
                                           const std::vector<const CorpusDocument*>& corpus) {
    if (els.size() < 2) return std::nullopt;
    auto covers_exactly = [&](const std::string& selector) {
        SelectorAst sel;
        try {
            sel = parse_selector(selector);
        } catch (const SelectorError&) {
            return false;
        }
        std::set<const HtmlNode*> want(els.begin(), els.end());
        std::set<const HtmlNode*> got;
        for (const CorpusDocument* d : corpus)
            for (const HtmlNode* hit : query_all(d->doc, sel)) got.insert(hit);
        return got == want;
    };

    std::set<std::string> common_classes = surface_of(*els[0]).classes;
    bool same_tag = true;
    for (const HtmlNode* el : els) {
        ElementSurface s = surface_of(*el);
        if (s.tag != els[0]->tag) same_tag = false;
        std::set<std::string> kept;
        std::set_intersection(common_classes.begin(), common_classes.end(), s.classes.begin(),
                              s.classes.end(), std::inserter(kept, kept.begin()));
        common_classes = std::move(kept);
    }
    for (const auto& cls : common_classes) {
        if (!ident_safe(cls)) continue;
        if (covers_exactly("." + cls)) return "." + cls;
        if (same_tag && covers_exactly(els[0]->tag + "." + cls)) return els[0]->tag + "." + cls;
    }
    if (same_tag) {
        static const char* kStableAttrs[] = {"name", "type", "href", "action"};
        for (const char* attr : kStableAttrs) {
            const std::string* v0 = els[0]->attr(attr);
            if (!v0 || v0->empty() || v0->find('"') != std::string::npos) continue;
            bool all_equal = std::all_of(els.begin(), els.end(), [&](const HtmlNode* el) {
                const std::string* v = el->attr(attr);
                return v && *v == *v0;
            });
            if (!all_equal) continue;
            std::string value = ident_safe(*v0) ? *v0 : "\"" + *v0 + "\"";
            std::string cand = els[0]->tag + "[" + std::string(attr) + "=" + value + "]";
            if (covers_exactly(cand)) return cand;
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<PolicySpec> parse_policies(std::string_view raw) {
    json root;
    try {
        root = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw PolicyError(std::string("policy file is not JSON: ") + e.what());
    }
    if (!root.is_array()) throw PolicyError("policy file must be a JSON array");
    std::vector<PolicySpec> out;
    int idx = 0;
    for (const json& p : root) {
        if (!p.is_object()) throw PolicyError("policy " + std::to_string(idx) + " must be an object");
        PolicySpec spec;
        if (p.contains("effect")) {
            std::string effect = p["effect"].get<std::string>();
            if (effect == "allow") spec.allow = true;
            else if (effect == "deny") spec.allow = false;
            else throw PolicyError("policy " + std::to_string(idx) + ": effect must be allow or deny");
        }
        if (p.contains("verb")) spec.verb = Verb::from_string(p["verb"].get<std::string>());
        if (p.contains("match")) spec.match = parse_predicate(p["match"], idx);
        if (p.contains("modifiers")) {
            if (!p["modifiers"].is_object())
                throw PolicyError("policy " + std::to_string(idx) + ": modifiers must be an object");
            spec.modifiers = p["modifiers"];
        }
        if (p.contains("guideline")) {
            const json& g = p["guideline"];
            if (!g.is_object() || !g.contains("directive") || !g.contains("description"))
                throw PolicyError("policy " + std::to_string(idx) +
                                  ": guideline needs directive and description");
            ActionGuideline ag;
            ag.directive_raw = g["directive"].get<std::string>();
            auto d = directive_from_string(ag.directive_raw);
            if (!d)
                throw PolicyError("policy " + std::to_string(idx) + ": bad directive '" +
                                  ag.directive_raw + "'");
            ag.directive = *d;
            ag.description = g["description"].get<std::string>();
            if (g.contains("exceptions")) ag.exceptions = g["exceptions"].get<std::string>();
            spec.guideline = ag;
        }
        if (!spec.match && !spec.guideline)
            throw PolicyError("policy " + std::to_string(idx) +
                              " needs at least one of match or guideline");
        if (spec.match && (!p.contains("effect") || !p.contains("verb")))
            throw PolicyError("policy " + std::to_string(idx) +
                              ": match policies need effect and verb");
        if (!spec.modifiers.is_null() && !spec.allow)
            throw PolicyError("policy " + std::to_string(idx) +
                              ": modifiers are only valid with effect=allow");
        out.push_back(std::move(spec));
        ++idx;
    }
    return out;
}

std::vector<CorpusDocument> load_corpus(const std::vector<std::string>& inputs,
                                        const CrawlLimits& limits, Fetcher* fetcher,
                                        std::vector<Diagnostic>& diagnostics) {
    if (inputs.empty()) throw CorpusError("no corpus inputs given");
    if (limits.max_pages < 1 || limits.max_depth < 0)
        throw CorpusError("crawl limits must be positive");

    std::vector<CorpusDocument> corpus;
    std::set<std::string>       visited;
    std::deque<std::pair<Url, int>> queue;  // (url, depth)
    int fetched_pages = 0;

    for (const auto& input : inputs) {
        if (is_url(input)) {
            auto url = Url::parse(input);
            if (!url) {
                diagnostics.push_back(
                    {Severity::Warning, "BAD_INPUT", input, "not a valid http(s) URL"});
                continue;
            }
            if (visited.insert(url->str()).second) queue.emplace_back(*url, 0);
        } else {
            std::ifstream in(input, std::ios::binary);
            if (!in) {
                diagnostics.push_back({Severity::Warning, "BAD_INPUT", input, "cannot read file"});
                continue;
            }
            std::stringstream ss;
            ss << in.rdbuf();
            corpus.push_back({input, parse_html(ss.str())});
        }
    }

    bool first_fetch = true;
    while (!queue.empty() && fetched_pages < limits.max_pages) {
        auto [url, depth] = queue.front();
        queue.pop_front();
        if (!fetcher) {
            diagnostics.push_back(
                {Severity::Warning, "BAD_INPUT", url.str(), "URL input but no fetcher configured"});
            break;
        }
        if (!first_fetch && limits.delay_seconds > 0)
            std::this_thread::sleep_for(std::chrono::duration<double>(limits.delay_seconds));
        first_fetch = false;
        FetchResponse resp;
        try {
            resp = fetcher->get(url, {});
        } catch (const TransportError& e) {
            diagnostics.push_back({Severity::Warning, "FETCH_FAILED", url.str(), e.what()});
            continue;
        }
        if (resp.status != 200) {
            diagnostics.push_back({Severity::Warning, "FETCH_FAILED", url.str(),
                                   "status " + std::to_string(resp.status)});
            continue;
        }
        ++fetched_pages;
        corpus.push_back({url.str(), parse_html(resp.body)});
        if (depth >= limits.max_depth) continue;
        for_each_element(corpus.back().doc, [&](const HtmlNode& n) {
            if (n.tag != "a") return;
            const std::string* href = n.attr("href");
            if (!href) return;
            auto next = resolve_url(url, *href);
            if (!next || !next->same_origin(url)) return;
            if (visited.insert(next->str()).second) queue.emplace_back(*next, depth + 1);
        });
    }

    if (corpus.empty()) throw CorpusError("all corpus inputs failed");
    return corpus;
}

SynthesisResult synthesize_selector(const HtmlNode& el, const CorpusDocument& home,
                                    const std::vector<CorpusDocument>& corpus) {
    std::vector<const CorpusDocument*> all;
    all.reserve(corpus.size());
    for (const auto& d : corpus) all.push_back(&d);
    if (auto sel = synthesize_in_scope(el, all)) return {sel, false};
    std::vector<const CorpusDocument*> home_only{&home};
    if (auto sel = synthesize_in_scope(el, home_only)) return {sel, true};
    return {std::nullopt, false};
}

bool CompilationReport::has_code(const std::string& code) const {
    for (const auto& p : policies)
        for (const auto& w : p.warnings)
            if (w.code == code) return true;
    return false;
}

std::string CompilationReport::to_text() const {
    std::ostringstream os;
    for (const auto& p : policies) {
        os << "policy " << p.policy_index << ": " << p.match_count << " element(s) matched, "
           << p.rules_emitted << " rule(s) emitted\n";
        for (const auto& w : p.warnings)
            os << "  " << to_string(w.severity) << ' ' << w.code << ' ' << w.message << '\n';
    }
    return os.str();
}

json CompilationReport::to_json() const {
    json out = json::array();
    for (const auto& p : policies) {
        json jp{{"policy", p.policy_index},
                {"match_count", p.match_count},
                {"rules_emitted", p.rules_emitted}};
        json warnings = json::array();
        for (const auto& w : p.warnings)
            warnings.push_back({{"severity", to_string(w.severity)},
                                {"code", w.code},
                                {"message", w.message}});
        jp["warnings"] = std::move(warnings);
        out.push_back(std::move(jp));
    }
    return out;
}

CompilationResult compile_policies(const std::vector<PolicySpec>& policies,
                                   const std::vector<CorpusDocument>& corpus,
                                   const CompileOptions& options) {
    if (policies.empty()) throw PolicyError("no policies given");

    std::vector<const CorpusDocument*> all_docs;
    all_docs.reserve(corpus.size());
    for (const auto& d : corpus) all_docs.push_back(&d);

    json rules = json::array();
    json guidelines = json::array();
    CompilationReport report;

    auto emit_rule = [&](const PolicySpec& p, const std::string& selector) {
        json rule{{"verb", p.verb.str()}, {"selector", selector}, {"allowed", p.allow}};
        if (!p.modifiers.is_null() && !p.modifiers.empty()) rule["modifiers"] = p.modifiers;
        rules.push_back(std::move(rule));
    };

    int idx = 0;
    for (const auto& policy : policies) {
        PolicyReport pr;
        pr.policy_index = idx;

        if (policy.guideline) {
            json g{{"directive", std::string(to_string(policy.guideline->directive))},
                   {"description", policy.guideline->description}};
            if (policy.guideline->exceptions) g["exceptions"] = *policy.guideline->exceptions;
            guidelines.push_back(std::move(g));
        }

        if (policy.match) {
            const ElementPredicate& pred = *policy.match;
            if (pred.pure_css() || pred.pure_any()) {
                emit_rule(policy, pred.pure_any() ? "*" : *pred.css);
                pr.match_count = count_matches(pred.pure_any() ? "*" : *pred.css, all_docs);
                pr.rules_emitted = 1;
            } else {
                std::vector<const HtmlNode*>          matched;
                std::vector<const CorpusDocument*>    matched_home;
                for (const auto& doc : corpus) {
                    for (const HtmlNode* el : all_elements(doc.doc)) {
                        if (predicate_matches(pred, *el, describe(*el))) {
                            matched.push_back(el);
                            matched_home.push_back(&doc);
                        }
                    }
                }
                pr.match_count = matched.size();
                if (matched.empty()) {
                    pr.warnings.push_back({Severity::Warning, "ZERO_MATCHES",
                                           "policy[" + std::to_string(idx) + "]",
                                           "no corpus element matches this policy"});
                } else if (auto shared = shared_selector(matched, all_docs)) {
                    emit_rule(policy, *shared);
                    pr.rules_emitted = 1;
                } else {
                    for (std::size_t i = 0; i < matched.size(); ++i) {
                        SynthesisResult syn =
                            synthesize_selector(*matched[i], *matched_home[i], corpus);
                        if (!syn.selector) {
                            pr.warnings.push_back(
                                {Severity::Warning, "UNSYNTHESIZABLE",
                                 "policy[" + std::to_string(idx) + "]",
                                 "no unique selector exists for a matched element in " +
                                     matched_home[i]->source});
                            continue;
                        }
                        if (syn.document_scoped)
                            pr.warnings.push_back(
                                {Severity::Warning, "DOCUMENT_SCOPED",
                                 "policy[" + std::to_string(idx) + "]",
                                 "selector '" + *syn.selector + "' is unique only within " +
                                     matched_home[i]->source});
                        emit_rule(policy, *syn.selector);
                        ++pr.rules_emitted;
                    }
                }
            }
        }
        report.policies.push_back(std::move(pr));
        ++idx;
    }

    json meta{{"schema_version", "1.0"}};
    if (options.last_updated) meta["last_updated"] = *options.last_updated;
    meta["author"] = "agent-permissions-generator";
    json root{{"metadata", std::move(meta)}, {"resource_rules", std::move(rules)}};
    if (!guidelines.empty()) root["action_guidelines"] = std::move(guidelines);

    // the emitted document must survive its own strict parse
    Manifest manifest = parse_manifest(root.dump());
    return {std::move(manifest), std::move(report)};
}

}  // namespace agentperm
