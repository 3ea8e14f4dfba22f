#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentperm/discovery.hpp"
#include "agentperm/html.hpp"
#include "agentperm/manifest.hpp"

namespace agentperm {

// Conjunction of element predicates; `css` is used verbatim, `any` matches
// every element.
struct ElementPredicate {
    std::optional<std::string>                         tag;
    std::optional<std::string>                         text_contains;  // case-insensitive, own text
    std::optional<std::pair<std::string, std::string>> attr;           // name, value (equals)
    std::optional<std::string>                         css;
    bool                                               any = false;

    bool pure_css() const { return css && !tag && !text_contains && !attr && !any; }
    bool pure_any() const { return any && !tag && !text_contains && !attr && !css; }
};

struct PolicySpec {
    bool                            allow = false;
    Verb                            verb;
    std::optional<ElementPredicate> match;
    json                            modifiers = json();  // raw modifiers object, allow only
    std::optional<ActionGuideline>  guideline;
};

struct PolicyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// JSON array of policy objects (see schema/policy-spec.schema.json).
std::vector<PolicySpec> parse_policies(std::string_view raw);

struct CorpusDocument {
    std::string  source;  // file path or URL
    HtmlDocument doc;
};

struct CrawlLimits {
    int    max_pages = 50;
    int    max_depth = 3;
    double delay_seconds = 1.0;  // politeness delay between fetches
};

struct CorpusError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Local paths parsed directly; http(s) URLs crawled breadth-first,
// same-origin, up to the limits. Individual failures become diagnostics;
// throws CorpusError only when there are no inputs or all inputs failed.
std::vector<CorpusDocument> load_corpus(const std::vector<std::string>& inputs,
                                        const CrawlLimits& limits, Fetcher* fetcher,
                                        std::vector<Diagnostic>& diagnostics);

struct PolicyReport {
    int                     policy_index = 0;
    std::size_t             match_count = 0;
    std::size_t             rules_emitted = 0;
    std::vector<Diagnostic> warnings;  // ZERO_MATCHES, UNSYNTHESIZABLE, DOCUMENT_SCOPED
};

struct CompilationReport {
    std::vector<PolicyReport> policies;

    bool has_code(const std::string& code) const;
    std::string to_text() const;
    json        to_json() const;
};

struct CompileOptions {
    std::optional<std::string> last_updated;  // omitted by default: keeps output reproducible
};

struct CompilationResult {
    Manifest          manifest;
    CompilationReport report;
};

CompilationResult compile_policies(const std::vector<PolicySpec>& policies,
                                   const std::vector<CorpusDocument>& corpus,
                                   const CompileOptions& options = {});

struct SynthesisResult {
    std::optional<std::string> selector;
    bool document_scoped = false;  // unique only within the element's own document
};

// Shortest selector (id > tag.class > tag.classes > tag[attr=value] >
// child-combinator path) that matches exactly {el} over the corpus.
SynthesisResult synthesize_selector(const HtmlNode& el, const CorpusDocument& home,
                                    const std::vector<CorpusDocument>& corpus);

}  // namespace agentperm
