#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentperm/diagnostics.hpp"
#include "agentperm/selector.hpp"

namespace agentperm {

using json = nlohmann::ordered_json;

// ── Verbs ─────────────────────────────────────────────────────────────────────

enum class VerbKind {
    ReadContent,
    ClickElement,
    FillInput,
    SubmitForm,
    FollowLink,
    PlayMedia,
    DownloadFile,
    Unknown,
};

// Canonical verb or unknown passthrough. Unknown verbs compare and serialize
// by their raw string, byte-identically.
struct Verb {
    VerbKind    kind = VerbKind::Unknown;
    std::string raw;

    static Verb from_string(std::string_view s);
    const std::string& str() const { return raw; }
    bool is_known() const { return kind != VerbKind::Unknown; }

    bool operator==(const Verb& o) const { return raw == o.raw; }
};

// ── Modifiers ─────────────────────────────────────────────────────────────────

struct RateLimit {
    std::int64_t max_requests = 0;
    std::int64_t window_seconds = 0;

    bool valid() const { return max_requests >= 1 && window_seconds >= 1; }
    bool operator==(const RateLimit&) const = default;
};

// Daily window in minutes past local midnight; start > end wraps midnight.
struct TimeWindow {
    int         start_minutes = 0;
    int         end_minutes = 0;
    std::string timezone = "UTC";

    std::string start_str() const;
    std::string end_str() const;
    bool operator==(const TimeWindow&) const = default;
};

struct Modifiers {
    std::optional<bool>         human_in_the_loop;
    std::optional<RateLimit>    rate_limit;
    std::optional<std::int64_t> max_concurrent;
    std::optional<TimeWindow>   time_window;
    json                        extra = json::object();  // unrecognized keys, preserved

    bool empty() const {
        return !human_in_the_loop && !rate_limit && !max_concurrent && !time_window &&
               extra.empty();
    }
    bool operator==(const Modifiers&) const = default;
};

// ── Rules, guidelines, API references ────────────────────────────────────────

struct ResourceRule {
    Verb                       verb;
    std::string                selector_raw;
    std::optional<SelectorAst> selector;  // nullopt only after a lenient parse
    bool                       allowed = false;
    std::optional<Modifiers>   modifiers;
    int                        source_index = 0;

    bool operator==(const ResourceRule&) const = default;
};

enum class Directive { Must, MustNot, Should, ShouldNot, May, Invalid };

std::optional<Directive> directive_from_string(std::string_view s);  // exact, uppercase
std::string_view to_string(Directive d);

struct ActionGuideline {
    Directive                  directive = Directive::Invalid;
    std::string                directive_raw;
    std::string                description;
    std::optional<std::string> exceptions;

    bool operator==(const ActionGuideline&) const = default;
};

enum class ApiKind { OpenApi, Mcp, A2a, Unknown };

struct ApiReference {
    ApiKind                    kind = ApiKind::Unknown;
    std::string                type_raw;
    std::string                endpoint;
    std::optional<std::string> docs;
    std::optional<std::string> description;

    bool operator==(const ApiReference&) const = default;
};

// ── Manifest ─────────────────────────────────────────────────────────────────

struct Metadata {
    std::string                schema_version;
    std::optional<std::string> last_updated;  // RFC 3339
    std::optional<std::string> author;
    json                       extra = json::object();

    bool operator==(const Metadata&) const = default;
};

struct Manifest {
    Metadata                     metadata;
    std::vector<ResourceRule>    resource_rules;
    std::vector<ActionGuideline> action_guidelines;
    std::vector<ApiReference>    api;
    json                         extra = json::object();  // unknown top-level keys

    bool operator==(const Manifest&) const = default;
};

// ── Parsing ──────────────────────────────────────────────────────────────────

struct ManifestParseError : std::runtime_error {
    std::string code;  // NOT_JSON, NOT_UTF8, MISSING_FIELD, TYPE_MISMATCH,
                       // INVALID_SELECTOR, INVALID_DIRECTIVE, INVALID_RATE_LIMIT,
                       // INVALID_TIME_WINDOW, INVALID_VERSION, INVALID_TIMESTAMP,
                       // INVALID_ENDPOINT
    std::string path;  // JSON path of the offending value

    ManifestParseError(std::string code_, std::string path_, const std::string& msg)
        : std::runtime_error(msg), code(std::move(code_)), path(std::move(path_)) {}
};

// Strict parse: every invariant established or ManifestParseError thrown.
Manifest parse_manifest(std::string_view raw);

// Lenient parse: only NOT_JSON / NOT_UTF8 are fatal; everything else is
// downgraded to diagnostics so a partly malformed manifest still yields
// usable rules (rules with unparseable selectors keep no AST).
struct LenientParseResult {
    Manifest                manifest;
    std::vector<Diagnostic> diagnostics;
};
LenientParseResult parse_manifest_lenient(std::string_view raw);

// Canonical serialization: fixed key order, two-space indent, trailing
// newline, UTF-8. parse(serialize(m)) == m.
std::string serialize_manifest(const Manifest& m);
json        manifest_to_json(const Manifest& m);

// Schema/lint diagnostics over a parsed manifest. Errors are invariant
// violations a lenient parse tolerated; warnings and infos are lint findings.
std::vector<Diagnostic> validate_manifest(const Manifest& m);

// Format helpers shared with validation.
bool is_valid_schema_version(std::string_view s);  // dot-separated non-negative ints
bool is_valid_rfc3339(std::string_view s);
bool is_valid_uri(std::string_view s);  // scheme present
std::optional<int> parse_hhmm(std::string_view s);  // minutes past midnight

}  // namespace agentperm
