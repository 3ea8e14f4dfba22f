#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentperm/manifest.hpp"
#include "agentperm/selector.hpp"

namespace agentperm {

// Default when no rule matches a query.
struct DefaultPolicy {
    bool allow = true;

    static DefaultPolicy allow_all() { return {true}; }
    static DefaultPolicy strict() { return {false}; }
};

struct PermissionQuery {
    Verb              verb;
    ElementDescriptor element;
    double            timestamp = 0;  // seconds; injected, never sampled internally
};

enum class Outcome { Allow, Deny, AllowWithObligations };

struct Obligation {
    enum class Kind { HumanInTheLoop, ThrottleWait, ConcurrencySlotRequired };
    Kind   kind;
    double wait_seconds = 0;  // ThrottleWait only, > 0

    bool operator==(const Obligation&) const = default;
};

struct TraceEntry {
    int                        rule_index;
    bool                       verb_matched;
    bool                       selector_matched;
    std::optional<Specificity> specificity;  // set when the selector matched
    std::string                reason;
};

struct Decision {
    Outcome                 outcome = Outcome::Allow;
    std::vector<Obligation> obligations;
    std::optional<int>      matched_rule;
    std::vector<TraceEntry> explanation;

    bool has(Obligation::Kind k) const {
        for (const auto& o : obligations)
            if (o.kind == k) return true;
        return false;
    }
    // True when the action may proceed right now (acquire records it).
    bool admitted() const {
        return outcome != Outcome::Deny && !has(Obligation::Kind::ThrottleWait) &&
               !has(Obligation::Kind::ConcurrencySlotRequired);
    }
};

struct ClockRegression : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ReleaseWithoutAcquire : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sliding logs and concurrency counters, keyed by (manifest identity, rule
// source index). acquire/release are atomic with respect to one instance.
class EnforcementState {
public:
    EnforcementState() = default;
    EnforcementState(const EnforcementState& o);
    EnforcementState& operator=(const EnforcementState& o);

    json to_json() const;
    static EnforcementState from_json(const json& j);

    friend Decision evaluate(const Manifest&, const PermissionQuery&, const EnforcementState&,
                             const DefaultPolicy&);
    friend Decision acquire(const Manifest&, const PermissionQuery&, EnforcementState&,
                            const DefaultPolicy&);
    friend void release(EnforcementState&, const Manifest&, int rule_index);

private:
    using Key = std::pair<std::string, int>;

    std::map<Key, std::vector<double>> logs_;      // admitted-event timestamps, ascending
    std::map<Key, std::int64_t>        in_flight_;
    double                             last_acquire_ = 0;
    bool                               any_acquire_ = false;
    mutable std::mutex                 mu_;
};

// Stable identity of a manifest, used to key enforcement state.
std::string manifest_identity(const Manifest& m);

// Pure rule resolution + obligation assembly against a state snapshot.
Decision evaluate(const Manifest& m, const PermissionQuery& q, const EnforcementState& s,
                  const DefaultPolicy& defaults = {});
Decision evaluate(const Manifest& m, const PermissionQuery& q,
                  const DefaultPolicy& defaults = {});

// Evaluate and, iff admitted, record the event (sliding log + concurrency
// slot). Throws ClockRegression when q.timestamp goes backwards.
Decision acquire(const Manifest& m, const PermissionQuery& q, EnforcementState& s,
                 const DefaultPolicy& defaults = {});

// Return a concurrency slot taken by a prior admitted acquire.
void release(EnforcementState& s, const Manifest& m, int rule_index);

// Render the evaluation trace for humans.
std::string explain(const Manifest& m, const PermissionQuery& q,
                    const DefaultPolicy& defaults = {});

// Plain-text action guideline block for prompt injection into an agent,
// preceded by an untrusted-content preamble. Empty manifest block -> "".
std::string guidelines_for(const Manifest& m);

}  // namespace agentperm
