#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentperm/diagnostics.hpp"
#include "agentperm/manifest.hpp"
#include "agentperm/url.hpp"

namespace agentperm {

constexpr const char* kWellKnownPath = "/.well-known/agent-permissions.json";
constexpr const char* kLinkRelToken = "agent-permissions";

// ── Fetching ─────────────────────────────────────────────────────────────────

struct FetchResponse {
    int                                status = 0;
    std::map<std::string, std::string> headers;  // names lowercase
    std::string                        body;

    std::optional<std::string> header(const std::string& name) const {
        auto it = headers.find(name);
        if (it == headers.end()) return std::nullopt;
        return it->second;
    }
};

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Injected HTTP capability; tests use in-process fixture servers.
class Fetcher {
public:
    virtual ~Fetcher() = default;
    // Single GET, no redirect following. Throws TransportError.
    virtual FetchResponse get(const Url& url,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

struct HttpFetcherOptions {
    double      timeout_seconds = 10.0;
    std::string user_agent = "agent-permissions-cpp/0.1";
};

// cpp-httplib backed fetcher for real traffic.
class HttpFetcher : public Fetcher {
public:
    explicit HttpFetcher(HttpFetcherOptions options = {}) : options_(std::move(options)) {}
    FetchResponse get(const Url& url,
                      const std::vector<std::pair<std::string, std::string>>& headers) override;

private:
    HttpFetcherOptions options_;
};

// ── Cache ────────────────────────────────────────────────────────────────────

struct CacheEntry {
    std::string                key;  // absolute manifest URL
    std::string                body;
    double                     stored_at = 0;
    std::int64_t               ttl_seconds = 0;
    std::optional<std::string> etag;
    std::optional<std::string> last_modified;

    bool fresh_at(double now) const { return now < stored_at + static_cast<double>(ttl_seconds); }
};

class CacheStore {
public:
    virtual ~CacheStore() = default;
    virtual std::optional<CacheEntry> get(const std::string& key) = 0;
    virtual void put(const CacheEntry& entry) = 0;
};

class MemoryCache : public CacheStore {
public:
    std::optional<CacheEntry> get(const std::string& key) override;
    void put(const CacheEntry& entry) override;

private:
    std::map<std::string, CacheEntry> entries_;
    std::mutex                        mu_;
};

// One JSON file per URL hash under `dir`.
class FileCache : public CacheStore {
public:
    explicit FileCache(std::string dir);
    std::optional<CacheEntry> get(const std::string& key) override;
    void put(const CacheEntry& entry) override;

private:
    std::string path_for(const std::string& key) const;
    std::string dir_;
    std::mutex  mu_;
};

// ── Discovery ────────────────────────────────────────────────────────────────

struct DiscoveryOptions {
    int          max_redirects = 5;
    std::size_t  max_body_bytes = 1 << 20;  // 1 MiB
    std::int64_t default_ttl_seconds = 3600;
};

enum class CacheStatus { Fresh, Revalidated, FromCache, Miss };
const char* to_string(CacheStatus s);

enum class SourceKind { LinkTag, WellKnown, None };
const char* to_string(SourceKind s);

struct DiscoveryResult {
    std::optional<Manifest> manifest;
    SourceKind              source = SourceKind::None;
    std::string             source_url;  // resolved manifest URL, empty when None
    double                  fetched_at = 0;
    CacheStatus             cache_status = CacheStatus::Miss;
    std::vector<Diagnostic> diagnostics;
};

struct FetchError : std::runtime_error {
    enum class Kind { NotFound, Transport, TooLarge, ParseFailed };
    Kind                    kind;
    std::vector<Diagnostic> diagnostics;  // ParseFailed only

    FetchError(Kind k, const std::string& msg, std::vector<Diagnostic> diags = {})
        : std::runtime_error(msg), kind(k), diagnostics(std::move(diags)) {}
};

struct ManifestFetch {
    Manifest                manifest;
    CacheStatus             cache_status;
    std::vector<Diagnostic> diagnostics;  // lenient-parse findings
};

// Cached, size-capped manifest fetch with lenient parsing. Throws FetchError.
ManifestFetch fetch_manifest(const Url& url, Fetcher& fetcher, CacheStore& cache, double now,
                             const DiscoveryOptions& options = {});

// First <link rel~="agent-permissions"> href resolved against base;
// `extra_count`, when given, receives the number of further matching tags.
std::optional<Url> extract_link_tag(std::string_view html, const Url& base,
                                    int* extra_count = nullptr);

// Page link tag first, origin well-known path second, absence as a value.
DiscoveryResult discover(const Url& page_url, Fetcher& fetcher, CacheStore& cache, double now,
                         const DiscoveryOptions& options = {});

}  // namespace agentperm
