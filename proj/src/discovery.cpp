#include "agentperm/discovery.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "agentperm/html.hpp"

namespace agentperm {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool rel_contains_token(const std::string& rel, std::string_view token) {
    std::istringstream is(to_lower(rel));
    std::string tok;
    while (is >> tok)
        if (tok == token) return true;
    return false;
}

std::optional<std::int64_t> max_age_of(const FetchResponse& resp) {
    auto cc = resp.header("cache-control");
    if (!cc) return std::nullopt;
    std::string lower = to_lower(*cc);
    auto pos = lower.find("max-age=");
    if (pos == std::string::npos) return std::nullopt;
    pos += 8;
    std::int64_t v = 0;
    bool any = false;
    while (pos < lower.size() && std::isdigit(static_cast<unsigned char>(lower[pos]))) {
        v = v * 10 + (lower[pos] - '0');
        ++pos;
        any = true;
    }
    if (!any) return std::nullopt;
    return v;
}

bool is_redirect(int status) {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

struct RedirectedResponse {
    FetchResponse response;
    Url           final_url;
};

RedirectedResponse fetch_following_redirects(
    Fetcher& fetcher, const Url& url,
    const std::vector<std::pair<std::string, std::string>>& headers,
    const DiscoveryOptions& options, std::vector<Diagnostic>* diagnostics) {
    Url current = url;
    for (int hop = 0; hop <= options.max_redirects; ++hop) {
        FetchResponse resp = fetcher.get(current, headers);
        if (!is_redirect(resp.status)) return {std::move(resp), current};
        auto location = resp.header("location");
        if (!location) throw TransportError("redirect without Location from " + current.str());
        auto next = resolve_url(current, *location);
        if (!next) throw TransportError("unresolvable redirect target '" + *location + "'");
        if (diagnostics)
            diagnostics->push_back({Severity::Info, "REDIRECT", current.str(),
                                    "redirected to " + next->str()});
        current = *next;
    }
    throw TransportError("more than " + std::to_string(options.max_redirects) +
                         " redirects from " + url.str());
}

ManifestFetch parse_fetched(const std::string& body, const std::string& url,
                            CacheStatus status) {
    try {
        LenientParseResult parsed = parse_manifest_lenient(body);
        return {std::move(parsed.manifest), status, std::move(parsed.diagnostics)};
    } catch (const ManifestParseError& e) {
        std::vector<Diagnostic> diags{{Severity::Error, e.code, url, e.what()}};
        throw FetchError(FetchError::Kind::ParseFailed, "manifest at " + url + " is not JSON",
                         std::move(diags));
    }
}

}  // namespace

const char* to_string(CacheStatus s) {
    switch (s) {
        case CacheStatus::Fresh:       return "fresh";
        case CacheStatus::Revalidated: return "revalidated";
        case CacheStatus::FromCache:   return "from_cache";
        case CacheStatus::Miss:        return "miss";
    }
    return "unknown";
}

const char* to_string(SourceKind s) {
    switch (s) {
        case SourceKind::LinkTag:   return "link-tag";
        case SourceKind::WellKnown: return "well-known";
        case SourceKind::None:      return "none";
    }
    return "unknown";
}

FetchResponse HttpFetcher::get(const Url& url,
                               const std::vector<std::pair<std::string, std::string>>& headers) {
    httplib::Client client(url.origin());
    client.set_follow_location(false);
    client.set_connection_timeout(options_.timeout_seconds);
    client.set_read_timeout(options_.timeout_seconds);
    httplib::Headers hdrs{{"User-Agent", options_.user_agent}};
    for (const auto& [name, value] : headers) hdrs.emplace(name, value);
    auto result = client.Get(url.path_and_query(), hdrs);
    if (!result) throw TransportError("GET " + url.str() + ": " + httplib::to_string(result.error()));
    FetchResponse resp;
    resp.status = result->status;
    resp.body = result->body;
    for (const auto& [name, value] : result->headers) resp.headers[to_lower(name)] = value;
    return resp;
}

std::optional<CacheEntry> MemoryCache::get(const std::string& key) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void MemoryCache::put(const CacheEntry& entry) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_[entry.key] = entry;
}

FileCache::FileCache(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string FileCache::path_for(const std::string& key) const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : key) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return dir_ + "/" + buf + ".json";
}

std::optional<CacheEntry> FileCache::get(const std::string& key) {
    std::lock_guard<std::mutex> lock(mu_);
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    try {
        json j = json::parse(in);
        if (j.value("key", "") != key) return std::nullopt;  // hash collision
        CacheEntry e;
        e.key = key;
        e.body = j.value("body", "");
        e.stored_at = j.value("stored_at", 0.0);
        e.ttl_seconds = j.value("ttl_seconds", std::int64_t{0});
        if (j.contains("etag")) e.etag = j["etag"].get<std::string>();
        if (j.contains("last_modified")) e.last_modified = j["last_modified"].get<std::string>();
        return e;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

void FileCache::put(const CacheEntry& entry) {
    std::lock_guard<std::mutex> lock(mu_);
    json j{{"key", entry.key},
           {"body", entry.body},
           {"stored_at", entry.stored_at},
           {"ttl_seconds", entry.ttl_seconds}};
    if (entry.etag) j["etag"] = *entry.etag;
    if (entry.last_modified) j["last_modified"] = *entry.last_modified;
    std::ofstream out(path_for(entry.key));
    out << j.dump(2) << "\n";
}

ManifestFetch fetch_manifest(const Url& url, Fetcher& fetcher, CacheStore& cache, double now,
                             const DiscoveryOptions& options) {
    const std::string key = url.str();
    std::optional<CacheEntry> entry = cache.get(key);

    if (entry && entry->fresh_at(now)) return parse_fetched(entry->body, key, CacheStatus::FromCache);

    std::vector<std::pair<std::string, std::string>> headers{{"Accept", "application/json"}};
    if (entry) {
        if (entry->etag) headers.emplace_back("If-None-Match", *entry->etag);
        if (entry->last_modified) headers.emplace_back("If-Modified-Since", *entry->last_modified);
    }

    RedirectedResponse fetched = [&] {
        try {
            return fetch_following_redirects(fetcher, url, headers, options, nullptr);
        } catch (const TransportError& e) {
            throw FetchError(FetchError::Kind::Transport, e.what());
        }
    }();
    const FetchResponse& resp = fetched.response;

    if (resp.status == 304 && entry) {
        entry->stored_at = now;
        if (auto ttl = max_age_of(resp)) entry->ttl_seconds = *ttl;
        cache.put(*entry);
        return parse_fetched(entry->body, key, CacheStatus::Revalidated);
    }
    if (resp.status == 404 || resp.status == 410)
        throw FetchError(FetchError::Kind::NotFound,
                         "no manifest at " + key + " (" + std::to_string(resp.status) + ")");
    if (resp.status != 200)
        throw FetchError(FetchError::Kind::Transport,
                         "GET " + key + " returned " + std::to_string(resp.status));
    if (resp.body.size() > options.max_body_bytes)
        throw FetchError(FetchError::Kind::TooLarge,
                         "manifest at " + key + " exceeds " +
                             std::to_string(options.max_body_bytes) + " bytes");

    CacheStatus status = entry ? CacheStatus::Fresh : CacheStatus::Miss;
    ManifestFetch result = parse_fetched(resp.body, key, status);

    CacheEntry store;
    store.key = key;
    store.body = resp.body;
    store.stored_at = now;
    store.ttl_seconds = max_age_of(resp).value_or(options.default_ttl_seconds);
    store.etag = resp.header("etag");
    store.last_modified = resp.header("last-modified");
    cache.put(store);
    return result;
}

std::optional<Url> extract_link_tag(std::string_view html, const Url& base, int* extra_count) {
    if (extra_count) *extra_count = 0;
    HtmlDocument doc;
    try {
        doc = parse_html(html);
    } catch (const HtmlParseError&) {
        return std::nullopt;
    }
    std::optional<Url> found;
    for_each_element(doc, [&](const HtmlNode& n) {
        if (n.tag != "link") return;
        const std::string* rel = n.attr("rel");
        if (!rel || !rel_contains_token(*rel, kLinkRelToken)) return;
        const std::string* href = n.attr("href");
        if (!href || href->empty()) return;
        auto resolved = resolve_url(base, *href);
        if (!resolved) return;
        if (!found)
            found = resolved;
        else if (extra_count)
            ++*extra_count;
    });
    return found;
}

DiscoveryResult discover(const Url& page_url, Fetcher& fetcher, CacheStore& cache, double now,
                         const DiscoveryOptions& options) {
    DiscoveryResult result;
    result.fetched_at = now;

    std::optional<Url> link_url;
    try {
        RedirectedResponse page =
            fetch_following_redirects(fetcher, page_url, {}, options, &result.diagnostics);
        if (page.response.status == 200 && page.response.body.size() <= options.max_body_bytes) {
            int extras = 0;
            link_url = extract_link_tag(page.response.body, page.final_url, &extras);
            if (extras > 0)
                result.diagnostics.push_back(
                    {Severity::Warning, "MULTIPLE_LINK_TAGS", page_url.str(),
                     std::to_string(extras) + " additional agent-permissions link tags ignored"});
        } else if (page.response.status != 200) {
            result.diagnostics.push_back({Severity::Warning, "PAGE_FETCH_FAILED", page_url.str(),
                                          "page returned " +
                                              std::to_string(page.response.status)});
        } else {
            result.diagnostics.push_back({Severity::Warning, "PAGE_TOO_LARGE", page_url.str(),
                                          "page body exceeds size cap; link tag not scanned"});
        }
    } catch (const TransportError& e) {
        result.diagnostics.push_back(
            {Severity::Warning, "PAGE_FETCH_FAILED", page_url.str(), e.what()});
    }

    if (link_url) {
        try {
            ManifestFetch fetched = fetch_manifest(*link_url, fetcher, cache, now, options);
            result.manifest = std::move(fetched.manifest);
            result.source = SourceKind::LinkTag;
            result.source_url = link_url->str();
            result.cache_status = fetched.cache_status;
            result.diagnostics.insert(result.diagnostics.end(), fetched.diagnostics.begin(),
                                      fetched.diagnostics.end());
            return result;
        } catch (const FetchError& e) {
            result.diagnostics.push_back({Severity::Warning, "LINK_TAG_FAILED", link_url->str(),
                                          std::string(e.what()) +
                                              "; falling back to the well-known path"});
        }
    }

    Url well_known = page_url;
    well_known.path = kWellKnownPath;
    well_known.query.clear();
    try {
        ManifestFetch fetched = fetch_manifest(well_known, fetcher, cache, now, options);
        result.manifest = std::move(fetched.manifest);
        result.source = SourceKind::WellKnown;
        result.source_url = well_known.str();
        result.cache_status = fetched.cache_status;
        result.diagnostics.insert(result.diagnostics.end(), fetched.diagnostics.begin(),
                                  fetched.diagnostics.end());
        return result;
    } catch (const FetchError& e) {
        if (e.kind == FetchError::Kind::NotFound) {
            result.source = SourceKind::None;
            return result;
        }
        if (e.kind == FetchError::Kind::ParseFailed) {
            result.source = SourceKind::None;
            result.diagnostics.insert(result.diagnostics.end(), e.diagnostics.begin(),
                                      e.diagnostics.end());
            return result;
        }
        throw;  // Transport / TooLarge: a network-level failure the caller must see
    }
}

}  // namespace agentperm
