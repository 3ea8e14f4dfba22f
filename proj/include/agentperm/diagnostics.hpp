#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace agentperm {

enum class Severity { Error, Warning, Info };

inline const char* to_string(Severity s) {
    switch (s) {
        case Severity::Error:   return "error";
        case Severity::Warning: return "warning";
        case Severity::Info:    return "info";
    }
    return "unknown";
}

// One finding from validation, lenient parsing, or discovery.
// `path` is a JSON-path locator ("$.resource_rules[2].selector") or a URL
// for discovery-level diagnostics.
struct Diagnostic {
    Severity    severity;
    std::string code;     // stable, SCREAMING_SNAKE_CASE
    std::string path;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const Diagnostic& d) {
    return os << to_string(d.severity) << ' ' << d.code << ' ' << d.path << ' ' << d.message;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return true;
    return false;
}

}  // namespace agentperm
