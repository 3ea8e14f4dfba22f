#include "agentperm/url.hpp"

#include <cctype>
#include <vector>

namespace agentperm {

namespace {

std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string remove_dot_segments(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    bool trailing_slash = false;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        std::size_t start = i;
        while (i < path.size() && path[i] != '/') ++i;
        std::string_view seg = path.substr(start, i - start);
        if (seg.empty()) continue;
        if (seg == ".") {
            trailing_slash = true;
        } else if (seg == "..") {
            if (!out.empty()) out.pop_back();
            trailing_slash = true;
        } else {
            out.push_back(std::string(seg));
            trailing_slash = false;
        }
    }
    if (!path.empty() && path.back() == '/') trailing_slash = true;
    std::string result;
    for (const auto& seg : out) result += "/" + seg;
    if (result.empty() || trailing_slash) result += "/";
    if (result.size() > 1 && result.back() == '/' && !trailing_slash)
        result.pop_back();
    return result;
}

}  // namespace

std::optional<Url> Url::parse(std::string_view s) {
    auto scheme_end = s.find("://");
    if (scheme_end == std::string_view::npos || scheme_end == 0) return std::nullopt;
    Url u;
    u.scheme = to_lower(std::string(s.substr(0, scheme_end)));
    if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
    std::size_t rest = scheme_end + 3;
    std::size_t authority_end = s.find_first_of("/?#", rest);
    std::string_view authority =
        s.substr(rest, authority_end == std::string_view::npos ? s.size() - rest
                                                               : authority_end - rest);
    if (authority.empty()) return std::nullopt;
    if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
        std::string_view port_sv = authority.substr(colon + 1);
        if (!port_sv.empty()) {
            int port = 0;
            for (char c : port_sv) {
                if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
                port = port * 10 + (c - '0');
            }
            if (port <= 0 || port > 65535) return std::nullopt;
            u.port = port;
        }
        authority = authority.substr(0, colon);
    }
    u.host = to_lower(std::string(authority));
    if (u.host.empty()) return std::nullopt;

    u.path = "/";
    if (authority_end != std::string_view::npos) {
        std::string_view tail = s.substr(authority_end);
        auto frag = tail.find('#');
        if (frag != std::string_view::npos) tail = tail.substr(0, frag);
        auto qmark = tail.find('?');
        if (qmark != std::string_view::npos) {
            u.query = std::string(tail.substr(qmark + 1));
            tail = tail.substr(0, qmark);
        }
        if (!tail.empty()) u.path = remove_dot_segments(tail);
    }
    return u;
}

std::string Url::origin() const {
    std::string out = scheme + "://" + host;
    if (port) out += ":" + std::to_string(port);
    return out;
}

std::string Url::path_and_query() const {
    return query.empty() ? path : path + "?" + query;
}

std::string Url::str() const { return origin() + path_and_query(); }

std::optional<Url> resolve_url(const Url& base, std::string_view ref) {
    // strip fragment
    if (auto frag = ref.find('#'); frag != std::string_view::npos) ref = ref.substr(0, frag);
    if (ref.empty()) return base;
    // a scheme prefix (e.g. "mailto:", "https:") makes the reference absolute
    if (std::isalpha(static_cast<unsigned char>(ref[0]))) {
        std::size_t i = 1;
        while (i < ref.size() && (std::isalnum(static_cast<unsigned char>(ref[i])) ||
                                  ref[i] == '+' || ref[i] == '-' || ref[i] == '.'))
            ++i;
        if (i < ref.size() && ref[i] == ':') return Url::parse(ref);
    }
    if (ref.size() >= 2 && ref[0] == '/' && ref[1] == '/')
        return Url::parse(base.scheme + ":" + std::string(ref));

    Url out = base;
    if (ref[0] == '/') {
        std::string_view tail = ref;
        auto qmark = tail.find('?');
        out.query.clear();
        if (qmark != std::string_view::npos) {
            out.query = std::string(tail.substr(qmark + 1));
            tail = tail.substr(0, qmark);
        }
        out.path = remove_dot_segments(tail);
        return out;
    }
    if (ref[0] == '?') {
        out.query = std::string(ref.substr(1));
        return out;
    }
    // relative path: merge with base directory
    std::string_view tail = ref;
    auto qmark = tail.find('?');
    out.query.clear();
    if (qmark != std::string_view::npos) {
        out.query = std::string(tail.substr(qmark + 1));
        tail = tail.substr(0, qmark);
    }
    std::string dir = base.path.substr(0, base.path.rfind('/') + 1);
    out.path = remove_dot_segments(dir + std::string(tail));
    return out;
}

}  // namespace agentperm
