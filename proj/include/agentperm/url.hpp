#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace agentperm {

// Minimal http(s) URL: enough for discovery and crawling. Fragments are
// dropped on parse.
struct Url {
    std::string scheme;  // lowercase
    std::string host;    // lowercase
    int         port = 0;  // 0 = scheme default
    std::string path;    // always starts with '/'
    std::string query;   // without '?', may be empty

    static std::optional<Url> parse(std::string_view s);

    int         effective_port() const { return port ? port : (scheme == "https" ? 443 : 80); }
    std::string origin() const;       // scheme://host[:port]
    std::string path_and_query() const;
    std::string str() const;

    bool same_origin(const Url& o) const {
        return scheme == o.scheme && host == o.host && effective_port() == o.effective_port();
    }
    bool operator==(const Url&) const = default;
};

// RFC 3986 reference resolution for the cases that occur in HTML href
// attributes: absolute, scheme-relative, absolute-path, relative-path,
// query-only. Dot segments are removed.
std::optional<Url> resolve_url(const Url& base, std::string_view ref);

}  // namespace agentperm
