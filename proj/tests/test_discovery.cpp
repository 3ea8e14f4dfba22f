#include <doctest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>

#include "agentperm/discovery.hpp"
#include "support.hpp"

using namespace agentperm;
using namespace testsupport;

namespace {

const char* kManifestA =
    R"({"metadata":{"schema_version":"1.0"},"resource_rules":[)"
    R"({"verb":"click_element","selector":".a","allowed":false}]})";
const char* kManifestB =
    R"({"metadata":{"schema_version":"1.0"},"resource_rules":[)"
    R"({"verb":"click_element","selector":".b","allowed":false}]})";

// In-memory fixture server: routes by absolute URL, hit counters, optional
// ETag-based conditional responses.
struct MapFetcher : Fetcher {
    struct Route {
        int                                status = 200;
        std::map<std::string, std::string> headers;  // lowercase names
        std::string                        body;
        std::optional<std::string>         etag;
    };
    std::map<std::string, Route> routes;
    std::map<std::string, int>   hits;
    bool                         fail_all = false;

    FetchResponse get(const Url& url,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
        if (fail_all) throw TransportError("connection refused");
        ++hits[url.str()];
        auto it = routes.find(url.str());
        if (it == routes.end()) return {404, {}, ""};
        const Route& r = it->second;
        if (r.etag) {
            for (const auto& [name, value] : headers) {
                if (name == "If-None-Match" && value == *r.etag)
                    return {304, {{"etag", *r.etag}}, ""};
            }
        }
        FetchResponse resp{r.status, r.headers, r.body};
        if (r.etag) resp.headers["etag"] = *r.etag;
        return resp;
    }
};

Url url(const std::string& s) { return *Url::parse(s); }

}  // namespace

TEST_CASE("fetch_manifest: cache hit within TTL") {
    MapFetcher f;
    f.routes["https://ex.com/m.json"] = {200, {}, kManifestA, std::nullopt};
    MemoryCache cache;

    ManifestFetch first = fetch_manifest(url("https://ex.com/m.json"), f, cache, 1000);
    CHECK(first.cache_status == CacheStatus::Miss);
    CHECK(first.manifest.resource_rules.size() == 1);

    ManifestFetch second = fetch_manifest(url("https://ex.com/m.json"), f, cache, 1500);
    CHECK(second.cache_status == CacheStatus::FromCache);
    CHECK(f.hits["https://ex.com/m.json"] == 1);  // no second network request
}

TEST_CASE("fetch_manifest: max-age expiry triggers revalidation") {
    MapFetcher f;
    f.routes["https://ex.com/m.json"] = {
        200, {{"cache-control", "max-age=10"}}, kManifestA, std::string("\"v1\"")};
    MemoryCache cache;

    fetch_manifest(url("https://ex.com/m.json"), f, cache, 1000);
    CHECK(fetch_manifest(url("https://ex.com/m.json"), f, cache, 1009).cache_status ==
          CacheStatus::FromCache);

    ManifestFetch reval = fetch_manifest(url("https://ex.com/m.json"), f, cache, 1011);
    CHECK(reval.cache_status == CacheStatus::Revalidated);
    CHECK(f.hits["https://ex.com/m.json"] == 2);  // conditional request issued

    // revalidation refreshed stored_at
    CHECK(fetch_manifest(url("https://ex.com/m.json"), f, cache, 1015).cache_status ==
          CacheStatus::FromCache);
}

TEST_CASE("fetch_manifest: stale entry without validators refetches fully") {
    MapFetcher f;
    f.routes["https://ex.com/m.json"] = {
        200, {{"cache-control", "max-age=10"}}, kManifestA, std::nullopt};
    MemoryCache cache;
    fetch_manifest(url("https://ex.com/m.json"), f, cache, 0);
    ManifestFetch again = fetch_manifest(url("https://ex.com/m.json"), f, cache, 100);
    CHECK(again.cache_status == CacheStatus::Fresh);  // 200 over a stale entry
    CHECK(f.hits["https://ex.com/m.json"] == 2);
}

TEST_CASE("fetch_manifest: error kinds") {
    MapFetcher f;
    MemoryCache cache;
    auto kind_of = [&](const std::string& u, const DiscoveryOptions& opt = {}) {
        try {
            fetch_manifest(url(u), f, cache, 0, opt);
        } catch (const FetchError& e) {
            return e.kind;
        }
        FAIL("expected FetchError");
        return FetchError::Kind::Transport;
    };

    CHECK(kind_of("https://ex.com/missing.json") == FetchError::Kind::NotFound);

    f.routes["https://ex.com/gone.json"] = {410, {}, "", std::nullopt};
    CHECK(kind_of("https://ex.com/gone.json") == FetchError::Kind::NotFound);

    f.routes["https://ex.com/err.json"] = {500, {}, "", std::nullopt};
    CHECK(kind_of("https://ex.com/err.json") == FetchError::Kind::Transport);

    DiscoveryOptions small;
    small.max_body_bytes = 64;
    f.routes["https://ex.com/big.json"] = {200, {}, std::string(65, 'x'), std::nullopt};
    CHECK(kind_of("https://ex.com/big.json", small) == FetchError::Kind::TooLarge);

    f.routes["https://ex.com/bad.json"] = {200, {}, "{nope", std::nullopt};
    try {
        fetch_manifest(url("https://ex.com/bad.json"), f, cache, 0);
        FAIL("expected ParseFailed");
    } catch (const FetchError& e) {
        CHECK(e.kind == FetchError::Kind::ParseFailed);
        CHECK(!e.diagnostics.empty());
    }

    f.fail_all = true;
    CHECK(kind_of("https://ex.com/m.json") == FetchError::Kind::Transport);
}

TEST_CASE("fetch_manifest: redirects followed up to the cap") {
    MapFetcher f;
    f.routes["https://ex.com/a"] = {301, {{"location", "/b"}}, "", std::nullopt};
    f.routes["https://ex.com/b"] = {302, {{"location", "https://ex.com/m.json"}}, "", std::nullopt};
    f.routes["https://ex.com/m.json"] = {200, {}, kManifestA, std::nullopt};
    MemoryCache cache;
    ManifestFetch got = fetch_manifest(url("https://ex.com/a"), f, cache, 0);
    CHECK(got.manifest.resource_rules[0].selector_raw == ".a");

    for (int i = 0; i < 7; ++i)
        f.routes["https://ex.com/loop" + std::to_string(i)] = {
            301, {{"location", "/loop" + std::to_string(i + 1)}}, "", std::nullopt};
    try {
        fetch_manifest(url("https://ex.com/loop0"), f, cache, 0);
        FAIL("expected Transport");
    } catch (const FetchError& e) {
        CHECK(e.kind == FetchError::Kind::Transport);
    }
}

TEST_CASE("extract_link_tag") {
    Url base = url("https://ex.com/a/b");

    auto rel = extract_link_tag("<link rel=\"agent-permissions\" href=\"perms.json\">", base);
    REQUIRE(rel);
    CHECK(rel->str() == "https://ex.com/a/perms.json");

    // token-based rel matching, case-insensitive
    auto multi = extract_link_tag(
        "<link rel=\"stylesheet agent-permissions\" href=\"/p.json\">", base);
    REQUIRE(multi);
    CHECK(multi->str() == "https://ex.com/p.json");
    CHECK(extract_link_tag("<link rel=\"Agent-Permissions\" href=\"/p.json\">", base));
    CHECK(!extract_link_tag("<link rel=\"agent-permissions-v2\" href=\"/p.json\">", base));

    CHECK(!extract_link_tag("<p>no links here</p>", base));
    CHECK(!extract_link_tag("<link rel=\"agent-permissions\">", base));  // no href

    int extras = -1;
    auto first = extract_link_tag(
        "<link rel=agent-permissions href=/one.json>"
        "<link rel=agent-permissions href=/two.json>",
        base, &extras);
    REQUIRE(first);
    CHECK(first->str() == "https://ex.com/one.json");  // first in document order
    CHECK(extras == 1);
}

TEST_CASE("discover: link tag wins over well-known") {
    MapFetcher f;
    f.routes["https://ex.com/page"] = {
        200, {}, "<html><head><link rel=\"agent-permissions\" href=\"/custom.json\"></head></html>",
        std::nullopt};
    f.routes["https://ex.com/custom.json"] = {200, {}, kManifestA, std::nullopt};
    f.routes["https://ex.com/.well-known/agent-permissions.json"] = {200, {}, kManifestB,
                                                                     std::nullopt};
    MemoryCache cache;
    DiscoveryResult r = discover(url("https://ex.com/page"), f, cache, 0);
    CHECK(r.source == SourceKind::LinkTag);
    CHECK(r.source_url == "https://ex.com/custom.json");
    REQUIRE(r.manifest);
    CHECK(r.manifest->resource_rules[0].selector_raw == ".a");  // not the well-known one
    CHECK(f.hits["https://ex.com/.well-known/agent-permissions.json"] == 0);
}

TEST_CASE("discover: broken link target falls back to well-known") {
    MapFetcher f;
    f.routes["https://ex.com/page"] = {
        200, {}, "<link rel=\"agent-permissions\" href=\"/gone.json\">", std::nullopt};
    f.routes["https://ex.com/.well-known/agent-permissions.json"] = {200, {}, kManifestB,
                                                                     std::nullopt};
    MemoryCache cache;
    DiscoveryResult r = discover(url("https://ex.com/page"), f, cache, 0);
    CHECK(r.source == SourceKind::WellKnown);
    REQUIRE(r.manifest);
    CHECK(r.manifest->resource_rules[0].selector_raw == ".b");
    bool diag = false;
    for (const auto& d : r.diagnostics)
        if (d.code == "LINK_TAG_FAILED") diag = true;
    CHECK(diag);
}

TEST_CASE("discover: absence is a value") {
    MapFetcher f;
    f.routes["https://ex.com/page"] = {200, {}, "<p>hello</p>", std::nullopt};
    MemoryCache cache;
    DiscoveryResult r = discover(url("https://ex.com/page"), f, cache, 0);
    CHECK(r.source == SourceKind::None);
    CHECK(!r.manifest);
    CHECK(r.source_url.empty());
}

TEST_CASE("discover: page fetch failure still reaches well-known") {
    MapFetcher f;
    f.routes["https://ex.com/page"] = {500, {}, "", std::nullopt};
    f.routes["https://ex.com/.well-known/agent-permissions.json"] = {200, {}, kManifestB,
                                                                     std::nullopt};
    MemoryCache cache;
    DiscoveryResult r = discover(url("https://ex.com/page"), f, cache, 0);
    CHECK(r.source == SourceKind::WellKnown);
    bool diag = false;
    for (const auto& d : r.diagnostics)
        if (d.code == "PAGE_FETCH_FAILED") diag = true;
    CHECK(diag);
}

TEST_CASE("discover: multiple link tags warn, first wins") {
    MapFetcher f;
    f.routes["https://ex.com/page"] = {200, {},
                                       "<link rel=agent-permissions href=/one.json>"
                                       "<link rel=agent-permissions href=/two.json>",
                                       std::nullopt};
    f.routes["https://ex.com/one.json"] = {200, {}, kManifestA, std::nullopt};
    MemoryCache cache;
    DiscoveryResult r = discover(url("https://ex.com/page"), f, cache, 0);
    CHECK(r.source_url == "https://ex.com/one.json");
    bool diag = false;
    for (const auto& d : r.diagnostics)
        if (d.code == "MULTIPLE_LINK_TAGS") diag = true;
    CHECK(diag);
}

TEST_CASE("discover: transport failure on the well-known fetch propagates") {
    MapFetcher f;
    f.fail_all = true;
    MemoryCache cache;
    CHECK_THROWS_AS(discover(url("https://ex.com/page"), f, cache, 0), FetchError);
}

TEST_CASE("FileCache round-trip") {
    std::string dir = (std::filesystem::temp_directory_path() / "agentperm-cache-test").string();
    std::filesystem::remove_all(dir);
    FileCache cache(dir);

    CHECK(!cache.get("https://ex.com/m.json"));
    CacheEntry e;
    e.key = "https://ex.com/m.json";
    e.body = kManifestA;
    e.stored_at = 42;
    e.ttl_seconds = 3600;
    e.etag = "\"v1\"";
    cache.put(e);

    auto got = cache.get("https://ex.com/m.json");
    REQUIRE(got);
    CHECK(got->body == e.body);
    CHECK(got->stored_at == 42);
    CHECK(got->ttl_seconds == 3600);
    CHECK(got->etag == e.etag);

    // a second FileCache over the same directory sees the entry
    FileCache reopened(dir);
    CHECK(reopened.get("https://ex.com/m.json"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("HttpFetcher against an in-process server") {
    httplib::Server svr;
    int link_hits = 0;
    svr.Get("/m.json", [&](const httplib::Request& req, httplib::Response& res) {
        ++link_hits;
        CHECK(req.get_header_value("Accept") == "application/json");
        res.set_header("Cache-Control", "max-age=300");
        res.set_content(kManifestA, "application/json");
    });
    svr.Get("/redir", [](const httplib::Request&, httplib::Response& res) {
        res.status = 302;
        res.set_header("Location", "/m.json");
    });
    int port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server([&] { svr.listen_after_bind(); });
    svr.wait_until_ready();

    HttpFetcher fetcher;
    std::string base = "http://127.0.0.1:" + std::to_string(port);

    FetchResponse direct = fetcher.get(url(base + "/m.json"), {{"Accept", "application/json"}});
    CHECK(direct.status == 200);
    CHECK(direct.body == kManifestA);
    CHECK(direct.header("cache-control") == "max-age=300");

    // the fetcher itself never follows redirects; fetch_manifest does
    FetchResponse redir = fetcher.get(url(base + "/redir"), {});
    CHECK(redir.status == 302);

    MemoryCache cache;
    ManifestFetch via = fetch_manifest(url(base + "/redir"), fetcher, cache, 0);
    CHECK(via.manifest.resource_rules[0].selector_raw == ".a");
    CHECK(link_hits == 2);

    CHECK_THROWS_AS(fetcher.get(url("http://127.0.0.1:1/closed"), {}), TransportError);

    svr.stop();
    server.join();
}
