#include "agentperm/manifest.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <utility>

namespace agentperm {

namespace {

constexpr std::array<std::pair<VerbKind, const char*>, 7> kVerbNames = {{
    {VerbKind::ReadContent, "read_content"},
    {VerbKind::ClickElement, "click_element"},
    {VerbKind::FillInput, "fill_input"},
    {VerbKind::SubmitForm, "submit_form"},
    {VerbKind::FollowLink, "follow_link"},
    {VerbKind::PlayMedia, "play_media"},
    {VerbKind::DownloadFile, "download_file"},
}};

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        std::size_t len;
        if (c < 0x80) len = 1;
        else if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        else return false;
        if (i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        if (len == 2 && c < 0xC2) return false;  // overlong
        i += len;
    }
    return true;
}

// Shared strict/lenient parse context. In strict mode problems throw; in
// lenient mode they are collected and parsing continues.
struct ParseCtx {
    bool                    strict;
    std::vector<Diagnostic> diagnostics;

    void problem(Severity sev, const std::string& code, const std::string& path,
                 const std::string& msg) {
        if (strict && sev == Severity::Error) throw ManifestParseError(code, path, msg + " at " + path);
        diagnostics.push_back({sev, code, path, msg});
    }
};

std::string rule_path(int i) { return "$.resource_rules[" + std::to_string(i) + "]"; }
std::string guideline_path(int i) { return "$.action_guidelines[" + std::to_string(i) + "]"; }
std::string api_path(int i) { return "$.api[" + std::to_string(i) + "]"; }

std::optional<std::string> opt_string(ParseCtx& ctx, const json& obj, const char* key,
                                      const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return std::nullopt;
    if (!it->is_string()) {
        ctx.problem(Severity::Error, "TYPE_MISMATCH", path + "." + key, "expected a string");
        return std::nullopt;
    }
    return it->get<std::string>();
}

Metadata parse_metadata(ParseCtx& ctx, const json& root) {
    Metadata meta;
    auto it = root.find("metadata");
    if (it == root.end()) {
        ctx.problem(Severity::Error, "MISSING_FIELD", "$.metadata", "metadata is mandatory");
        return meta;
    }
    if (!it->is_object()) {
        ctx.problem(Severity::Error, "TYPE_MISMATCH", "$.metadata", "metadata must be an object");
        return meta;
    }
    const json& m = *it;
    if (auto v = opt_string(ctx, m, "schema_version", "$.metadata")) {
        meta.schema_version = *v;
        if (!is_valid_schema_version(meta.schema_version))
            ctx.problem(Severity::Error, "INVALID_VERSION", "$.metadata.schema_version",
                        "schema_version must be dot-separated non-negative integers");
    } else if (!m.contains("schema_version")) {
        ctx.problem(Severity::Error, "MISSING_FIELD", "$.metadata.schema_version",
                    "schema_version is mandatory");
    }
    meta.last_updated = opt_string(ctx, m, "last_updated", "$.metadata");
    if (meta.last_updated && !is_valid_rfc3339(*meta.last_updated))
        ctx.problem(Severity::Error, "INVALID_TIMESTAMP", "$.metadata.last_updated",
                    "last_updated must be an RFC 3339 timestamp");
    meta.author = opt_string(ctx, m, "author", "$.metadata");
    for (auto& [key, value] : m.items()) {
        if (key != "schema_version" && key != "last_updated" && key != "author")
            meta.extra[key] = value;
    }
    return meta;
}

std::optional<Modifiers> parse_modifiers(ParseCtx& ctx, const json& rule, int idx) {
    auto it = rule.find("modifiers");
    if (it == rule.end()) return std::nullopt;
    std::string path = rule_path(idx) + ".modifiers";
    if (!it->is_object()) {
        ctx.problem(Severity::Error, "TYPE_MISMATCH", path, "modifiers must be an object");
        return std::nullopt;
    }
    Modifiers mods;
    for (auto& [key, value] : it->items()) {
        std::string kpath = path + "." + key;
        if (key == "human_in_the_loop") {
            if (value.is_boolean())
                mods.human_in_the_loop = value.get<bool>();
            else
                ctx.problem(Severity::Error, "TYPE_MISMATCH", kpath, "expected a boolean");
        } else if (key == "rate_limit") {
            if (!value.is_object() || !value.contains("max_requests") ||
                !value.contains("window_seconds") ||
                !value["max_requests"].is_number_integer() ||
                !value["window_seconds"].is_number_integer()) {
                ctx.problem(Severity::Error, "INVALID_RATE_LIMIT", kpath,
                            "rate_limit needs integer max_requests and window_seconds");
                continue;
            }
            RateLimit rl{value["max_requests"].get<std::int64_t>(),
                         value["window_seconds"].get<std::int64_t>()};
            if (!rl.valid())
                ctx.problem(Severity::Error, "INVALID_RATE_LIMIT", kpath,
                            "max_requests and window_seconds must be >= 1");
            mods.rate_limit = rl;
        } else if (key == "max_concurrent") {
            if (!value.is_number_integer()) {
                ctx.problem(Severity::Error, "TYPE_MISMATCH", kpath, "expected an integer");
                continue;
            }
            mods.max_concurrent = value.get<std::int64_t>();
            if (*mods.max_concurrent < 1)
                ctx.problem(Severity::Error, "INVALID_CONCURRENCY", kpath,
                            "max_concurrent must be >= 1");
        } else if (key == "time_window") {
            if (!value.is_object() || !value.contains("start") || !value.contains("end") ||
                !value["start"].is_string() || !value["end"].is_string()) {
                ctx.problem(Severity::Error, "INVALID_TIME_WINDOW", kpath,
                            "time_window needs start and end strings");
                continue;
            }
            TimeWindow tw;
            auto start = parse_hhmm(value["start"].get<std::string>());
            auto end = parse_hhmm(value["end"].get<std::string>());
            if (!start || !end) {
                ctx.problem(Severity::Error, "INVALID_TIME_WINDOW", kpath,
                            "start/end must be HH:MM (24h)");
                continue;
            }
            tw.start_minutes = *start;
            tw.end_minutes = *end;
            if (tw.start_minutes == tw.end_minutes)
                ctx.problem(Severity::Error, "INVALID_TIME_WINDOW", kpath,
                            "start and end must differ");
            if (value.contains("timezone")) {
                if (value["timezone"].is_string())
                    tw.timezone = value["timezone"].get<std::string>();
                else
                    ctx.problem(Severity::Error, "TYPE_MISMATCH", kpath + ".timezone",
                                "expected a string");
            }
            mods.time_window = tw;
        } else {
            mods.extra[key] = value;
        }
    }
    return mods;
}

std::vector<ResourceRule> parse_rules(ParseCtx& ctx, const json& root) {
    std::vector<ResourceRule> rules;
    auto it = root.find("resource_rules");
    if (it == root.end()) {
        ctx.problem(Severity::Error, "MISSING_FIELD", "$.resource_rules",
                    "resource_rules is mandatory (may be empty)");
        return rules;
    }
    if (!it->is_array()) {
        ctx.problem(Severity::Error, "TYPE_MISMATCH", "$.resource_rules",
                    "resource_rules must be an array");
        return rules;
    }
    int idx = 0;
    for (const json& r : *it) {
        std::string path = rule_path(idx);
        if (!r.is_object()) {
            ctx.problem(Severity::Error, "TYPE_MISMATCH", path, "rule must be an object");
            ++idx;
            continue;
        }
        ResourceRule rule;
        rule.source_index = idx;
        if (auto v = opt_string(ctx, r, "verb", path)) {
            rule.verb = Verb::from_string(*v);
        } else {
            ctx.problem(Severity::Error, "MISSING_FIELD", path + ".verb", "verb is mandatory");
        }
        if (auto v = opt_string(ctx, r, "selector", path)) {
            rule.selector_raw = *v;
        } else {
            ctx.problem(Severity::Error, "MISSING_FIELD", path + ".selector",
                        "selector is mandatory");
        }
        if (rule.selector_raw.empty()) {
            ctx.problem(Severity::Error, "INVALID_SELECTOR", path + ".selector",
                        "selector must be non-empty");
        } else {
            try {
                rule.selector = parse_selector(rule.selector_raw);
            } catch (const SelectorError& e) {
                ctx.problem(Severity::Error, "INVALID_SELECTOR", path + ".selector", e.what());
            }
        }
        auto allowed = r.find("allowed");
        if (allowed == r.end()) {
            ctx.problem(Severity::Error, "MISSING_FIELD", path + ".allowed",
                        "allowed is mandatory");
        } else if (!allowed->is_boolean()) {
            ctx.problem(Severity::Error, "TYPE_MISMATCH", path + ".allowed",
                        "allowed must be a boolean");
        } else {
            rule.allowed = allowed->get<bool>();
        }
        rule.modifiers = parse_modifiers(ctx, r, idx);
        rules.push_back(std::move(rule));
        ++idx;
    }
    return rules;
}

std::vector<ActionGuideline> parse_guidelines(ParseCtx& ctx, const json& root) {
    std::vector<ActionGuideline> out;
    auto it = root.find("action_guidelines");
    if (it == root.end()) return out;
    if (!it->is_array()) {
        ctx.problem(Severity::Error, "TYPE_MISMATCH", "$.action_guidelines",
                    "action_guidelines must be an array");
        return out;
    }
    int idx = 0;
    for (const json& g : *it) {
        std::string path = guideline_path(idx);
        if (!g.is_object()) {
            ctx.problem(Severity::Error, "TYPE_MISMATCH", path, "guideline must be an object");
            ++idx;
            continue;
        }
        ActionGuideline ag;
        if (auto v = opt_string(ctx, g, "directive", path)) {
            ag.directive_raw = *v;
            if (auto d = directive_from_string(*v))
                ag.directive = *d;
            else
                ctx.problem(Severity::Error, "INVALID_DIRECTIVE", path + ".directive",
                            "directive must be one of MUST, MUST NOT, SHOULD, SHOULD NOT, MAY");
        } else {
            ctx.problem(Severity::Error, "MISSING_FIELD", path + ".directive",
                        "directive is mandatory");
        }
        if (auto v = opt_string(ctx, g, "description", path)) ag.description = *v;
        if (ag.description.empty())
            ctx.problem(Severity::Error, "EMPTY_DESCRIPTION", path + ".description",
                        "description must be non-empty");
        ag.exceptions = opt_string(ctx, g, "exceptions", path);
        out.push_back(std::move(ag));
        ++idx;
    }
    return out;
}

std::vector<ApiReference> parse_api(ParseCtx& ctx, const json& root) {
    std::vector<ApiReference> out;
    auto it = root.find("api");
    if (it == root.end()) return out;
    if (!it->is_array()) {
        ctx.problem(Severity::Error, "TYPE_MISMATCH", "$.api", "api must be an array");
        return out;
    }
    int idx = 0;
    for (const json& a : *it) {
        std::string path = api_path(idx);
        if (!a.is_object()) {
            ctx.problem(Severity::Error, "TYPE_MISMATCH", path, "api entry must be an object");
            ++idx;
            continue;
        }
        ApiReference ref;
        if (auto v = opt_string(ctx, a, "type", path)) {
            ref.type_raw = *v;
            if (*v == "openapi") ref.kind = ApiKind::OpenApi;
            else if (*v == "mcp") ref.kind = ApiKind::Mcp;
            else if (*v == "a2a") ref.kind = ApiKind::A2a;
        } else {
            ctx.problem(Severity::Error, "MISSING_FIELD", path + ".type", "type is mandatory");
        }
        if (auto v = opt_string(ctx, a, "endpoint", path)) {
            ref.endpoint = *v;
            if (!is_valid_uri(ref.endpoint))
                ctx.problem(Severity::Error, "INVALID_ENDPOINT", path + ".endpoint",
                            "endpoint must be a URI with a scheme");
        } else {
            ctx.problem(Severity::Error, "MISSING_FIELD", path + ".endpoint",
                        "endpoint is mandatory");
        }
        ref.docs = opt_string(ctx, a, "docs", path);
        ref.description = opt_string(ctx, a, "description", path);
        out.push_back(std::move(ref));
        ++idx;
    }
    return out;
}

Manifest parse_impl(ParseCtx& ctx, std::string_view raw) {
    if (!is_valid_utf8(raw))
        throw ManifestParseError("NOT_UTF8", "$", "document is not valid UTF-8");
    json root;
    try {
        root = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ManifestParseError("NOT_JSON", "$", e.what());
    }
    if (!root.is_object()) throw ManifestParseError("NOT_JSON", "$", "top level must be an object");

    Manifest m;
    m.metadata = parse_metadata(ctx, root);
    m.resource_rules = parse_rules(ctx, root);
    m.action_guidelines = parse_guidelines(ctx, root);
    m.api = parse_api(ctx, root);
    for (auto& [key, value] : root.items()) {
        if (key != "metadata" && key != "resource_rules" && key != "action_guidelines" &&
            key != "api")
            m.extra[key] = value;
    }
    return m;
}

bool is_ascii_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

Verb Verb::from_string(std::string_view s) {
    Verb v;
    v.raw = std::string(s);
    for (const auto& [kind, name] : kVerbNames) {
        if (s == name) {
            v.kind = kind;
            return v;
        }
    }
    v.kind = VerbKind::Unknown;
    return v;
}

std::optional<Directive> directive_from_string(std::string_view s) {
    if (s == "MUST") return Directive::Must;
    if (s == "MUST NOT") return Directive::MustNot;
    if (s == "SHOULD") return Directive::Should;
    if (s == "SHOULD NOT") return Directive::ShouldNot;
    if (s == "MAY") return Directive::May;
    return std::nullopt;
}

std::string_view to_string(Directive d) {
    switch (d) {
        case Directive::Must:      return "MUST";
        case Directive::MustNot:   return "MUST NOT";
        case Directive::Should:    return "SHOULD";
        case Directive::ShouldNot: return "SHOULD NOT";
        case Directive::May:       return "MAY";
        case Directive::Invalid:   return "INVALID";
    }
    return "INVALID";
}

std::string TimeWindow::start_str() const {
    char buf[6];
    std::snprintf(buf, sizeof buf, "%02d:%02d", start_minutes / 60, start_minutes % 60);
    return buf;
}

std::string TimeWindow::end_str() const {
    char buf[6];
    std::snprintf(buf, sizeof buf, "%02d:%02d", end_minutes / 60, end_minutes % 60);
    return buf;
}

bool is_valid_schema_version(std::string_view s) {
    if (s.empty()) return false;
    bool digit_seen = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '.') {
            if (!digit_seen) return false;
            digit_seen = false;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            digit_seen = true;
        } else {
            return false;
        }
    }
    return digit_seen;
}

bool is_valid_rfc3339(std::string_view s) {
    // full-date "T" full-time, e.g. 2025-01-31T23:59:60.5+02:00
    auto digits = [&](std::size_t pos, int n) {
        if (pos + n > s.size()) return false;
        for (int i = 0; i < n; ++i)
            if (!std::isdigit(static_cast<unsigned char>(s[pos + i]))) return false;
        return true;
    };
    auto num = [&](std::size_t pos, int n) {
        int v = 0;
        for (int i = 0; i < n; ++i) v = v * 10 + (s[pos + i] - '0');
        return v;
    };
    if (s.size() < 20) return false;
    if (!digits(0, 4) || s[4] != '-' || !digits(5, 2) || s[7] != '-' || !digits(8, 2)) return false;
    if (s[10] != 'T' && s[10] != 't') return false;
    if (!digits(11, 2) || s[13] != ':' || !digits(14, 2) || s[16] != ':' || !digits(17, 2))
        return false;
    int year = num(0, 4), month = num(5, 2), day = num(8, 2);
    int hour = num(11, 2), minute = num(14, 2), second = num(17, 2);
    if (month < 1 || month > 12 || day < 1) return false;
    static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int maxd = kDays[month - 1];
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) maxd = 29;
    if (day > maxd) return false;
    if (hour > 23 || minute > 59 || second > 60) return false;
    std::size_t i = 19;
    if (i < s.size() && s[i] == '.') {
        ++i;
        if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    }
    if (i >= s.size()) return false;
    if (s[i] == 'Z' || s[i] == 'z') return i + 1 == s.size();
    if (s[i] != '+' && s[i] != '-') return false;
    if (!digits(i + 1, 2) || i + 3 >= s.size() || s[i + 3] != ':' || !digits(i + 4, 2)) return false;
    if (i + 6 != s.size()) return false;
    return num(i + 1, 2) <= 23 && num(i + 4, 2) <= 59;
}

bool is_valid_uri(std::string_view s) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    std::size_t i = 1;
    while (i < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '+' || s[i] == '-' ||
            s[i] == '.'))
        ++i;
    return i < s.size() && s[i] == ':' && i + 1 < s.size();
}

std::optional<int> parse_hhmm(std::string_view s) {
    if (s.size() != 5 || s[2] != ':') return std::nullopt;
    if (!is_ascii_digit(s[0]) || !is_ascii_digit(s[1]) || !is_ascii_digit(s[3]) ||
        !is_ascii_digit(s[4]))
        return std::nullopt;
    int h = (s[0] - '0') * 10 + (s[1] - '0');
    int m = (s[3] - '0') * 10 + (s[4] - '0');
    if (h > 23 || m > 59) return std::nullopt;
    return h * 60 + m;
}

Manifest parse_manifest(std::string_view raw) {
    ParseCtx ctx{true, {}};
    return parse_impl(ctx, raw);
}

LenientParseResult parse_manifest_lenient(std::string_view raw) {
    ParseCtx ctx{false, {}};
    Manifest m = parse_impl(ctx, raw);
    return {std::move(m), std::move(ctx.diagnostics)};
}

json manifest_to_json(const Manifest& m) {
    json root = json::object();
    json meta = json::object();
    meta["schema_version"] = m.metadata.schema_version;
    if (m.metadata.last_updated) meta["last_updated"] = *m.metadata.last_updated;
    if (m.metadata.author) meta["author"] = *m.metadata.author;
    for (auto& [k, v] : m.metadata.extra.items()) meta[k] = v;
    root["metadata"] = std::move(meta);

    json rules = json::array();
    for (const auto& r : m.resource_rules) {
        json jr = json::object();
        jr["verb"] = r.verb.str();
        jr["selector"] = r.selector_raw;
        jr["allowed"] = r.allowed;
        if (r.modifiers) {
            json jm = json::object();
            const Modifiers& mods = *r.modifiers;
            if (mods.human_in_the_loop) jm["human_in_the_loop"] = *mods.human_in_the_loop;
            if (mods.rate_limit) {
                jm["rate_limit"] = {{"max_requests", mods.rate_limit->max_requests},
                                    {"window_seconds", mods.rate_limit->window_seconds}};
            }
            if (mods.max_concurrent) jm["max_concurrent"] = *mods.max_concurrent;
            if (mods.time_window) {
                jm["time_window"] = {{"start", mods.time_window->start_str()},
                                     {"end", mods.time_window->end_str()},
                                     {"timezone", mods.time_window->timezone}};
            }
            for (auto& [k, v] : mods.extra.items()) jm[k] = v;
            jr["modifiers"] = std::move(jm);
        }
        rules.push_back(std::move(jr));
    }
    root["resource_rules"] = std::move(rules);

    if (!m.action_guidelines.empty()) {
        json gs = json::array();
        for (const auto& g : m.action_guidelines) {
            json jg = json::object();
            jg["directive"] =
                g.directive == Directive::Invalid ? g.directive_raw : std::string(to_string(g.directive));
            jg["description"] = g.description;
            if (g.exceptions) jg["exceptions"] = *g.exceptions;
            gs.push_back(std::move(jg));
        }
        root["action_guidelines"] = std::move(gs);
    }

    if (!m.api.empty()) {
        json apis = json::array();
        for (const auto& a : m.api) {
            json ja = json::object();
            ja["type"] = a.type_raw;
            ja["endpoint"] = a.endpoint;
            if (a.docs) ja["docs"] = *a.docs;
            if (a.description) ja["description"] = *a.description;
            apis.push_back(std::move(ja));
        }
        root["api"] = std::move(apis);
    }

    for (auto& [k, v] : m.extra.items()) root[k] = v;
    return root;
}

std::string serialize_manifest(const Manifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

std::vector<Diagnostic> validate_manifest(const Manifest& m) {
    std::vector<Diagnostic> out;
    auto add = [&](Severity sev, const char* code, const std::string& path,
                   const std::string& msg) { out.push_back({sev, code, path, msg}); };

    if (!is_valid_schema_version(m.metadata.schema_version))
        add(Severity::Error, "INVALID_VERSION", "$.metadata.schema_version",
            "schema_version must be dot-separated non-negative integers");
    if (!m.metadata.last_updated)
        add(Severity::Warning, "MISSING_LAST_UPDATED", "$.metadata.last_updated",
            "last_updated is recommended");
    else if (!is_valid_rfc3339(*m.metadata.last_updated))
        add(Severity::Error, "INVALID_TIMESTAMP", "$.metadata.last_updated",
            "last_updated must be an RFC 3339 timestamp");

    std::vector<std::pair<std::string, std::string>> seen;  // (verb, selector)
    for (const auto& r : m.resource_rules) {
        std::string path = rule_path(r.source_index);
        if (r.selector_raw.empty())
            add(Severity::Error, "INVALID_SELECTOR", path + ".selector", "selector is empty");
        else if (!r.selector)
            add(Severity::Error, "INVALID_SELECTOR", path + ".selector",
                "selector failed to parse; this rule never matches");
        if (!r.verb.is_known())
            add(Severity::Warning, "UNKNOWN_VERB", path + ".verb",
                "unknown verb '" + r.verb.str() + "'");
        for (const auto& [v, s] : seen) {
            if (v == r.verb.str() && s == r.selector_raw) {
                add(Severity::Warning, "DUPLICATE_RULE", path,
                    "duplicate (verb, selector) pair '" + v + "', '" + s + "'");
                break;
            }
        }
        seen.emplace_back(r.verb.str(), r.selector_raw);
        if (r.modifiers) {
            const Modifiers& mods = *r.modifiers;
            if (!r.allowed)
                add(Severity::Warning, "MODIFIER_ON_DENY", path + ".modifiers",
                    "modifiers have no effect on a deny rule");
            if (mods.empty())
                add(Severity::Warning, "EMPTY_MODIFIERS", path + ".modifiers",
                    "modifiers object is empty");
            for (auto& [k, v] : mods.extra.items())
                add(Severity::Warning, "UNKNOWN_MODIFIER", path + ".modifiers." + k,
                    "unknown modifier key '" + k + "'");
            if (mods.rate_limit && !mods.rate_limit->valid())
                add(Severity::Error, "INVALID_RATE_LIMIT", path + ".modifiers.rate_limit",
                    "max_requests and window_seconds must be >= 1");
            if (mods.max_concurrent && *mods.max_concurrent < 1)
                add(Severity::Error, "INVALID_CONCURRENCY", path + ".modifiers.max_concurrent",
                    "max_concurrent must be >= 1");
            if (mods.time_window && mods.time_window->start_minutes == mods.time_window->end_minutes)
                add(Severity::Error, "INVALID_TIME_WINDOW", path + ".modifiers.time_window",
                    "start and end must differ");
        }
    }

    for (std::size_t i = 0; i < m.action_guidelines.size(); ++i) {
        const auto& g = m.action_guidelines[i];
        std::string path = guideline_path(static_cast<int>(i));
        if (g.directive == Directive::Invalid)
            add(Severity::Error, "INVALID_DIRECTIVE", path + ".directive",
                "directive '" + g.directive_raw +
                    "' is not one of MUST, MUST NOT, SHOULD, SHOULD NOT, MAY");
        if (g.description.empty())
            add(Severity::Error, "EMPTY_DESCRIPTION", path + ".description",
                "description must be non-empty");
    }

    for (std::size_t i = 0; i < m.api.size(); ++i) {
        const auto& a = m.api[i];
        std::string path = api_path(static_cast<int>(i));
        if (!is_valid_uri(a.endpoint))
            add(Severity::Error, "INVALID_ENDPOINT", path + ".endpoint",
                "endpoint must be a URI with a scheme");
        if (a.kind == ApiKind::Unknown)
            add(Severity::Warning, "UNKNOWN_API_TYPE", path + ".type",
                "unknown api type '" + a.type_raw + "'");
    }

    for (auto& [k, v] : m.extra.items())
        add(Severity::Info, "UNKNOWN_KEY", "$." + k, "unknown top-level key '" + k + "'");

    return out;
}

}  // namespace agentperm
