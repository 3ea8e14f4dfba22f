#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agentperm/discovery.hpp"
#include "agentperm/engine.hpp"
#include "agentperm/generator.hpp"
#include "agentperm/html.hpp"
#include "agentperm/manifest.hpp"

namespace {

using namespace agentperm;

constexpr int kExitOk = 0;
constexpr int kExitDenyOrErrors = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNetwork = 3;
constexpr int kExitInternal = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Path or http(s) URL -> raw bytes.
std::string read_source(const std::string& source) {
    if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
        auto url = Url::parse(source);
        if (!url) throw UsageError("invalid URL " + source);
        HttpFetcher fetcher;
        FetchResponse resp = fetcher.get(*url, {{"Accept", "application/json"}});
        if (resp.status != 200)
            throw TransportError("GET " + source + " returned " + std::to_string(resp.status));
        return resp.body;
    }
    return read_file(source);
}

ElementSurface surface_from_json(const json& j) {
    ElementSurface el;
    el.tag = j.value("tag", "");
    if (el.tag.empty()) throw UsageError("element JSON needs a tag");
    if (j.contains("id")) el.id = j["id"].get<std::string>();
    if (j.contains("classes"))
        for (const auto& c : j["classes"]) el.classes.insert(c.get<std::string>());
    if (j.contains("attributes"))
        for (auto& [k, v] : j["attributes"].items()) el.attributes[k] = v.get<std::string>();
    return el;
}

ElementDescriptor element_from_json(const json& j) {
    ElementDescriptor el;
    static_cast<ElementSurface&>(el) = surface_from_json(j);
    if (j.contains("ancestors"))
        for (const auto& a : j["ancestors"]) el.ancestors.push_back(surface_from_json(a));
    return el;
}

struct ElementArgs {
    std::string html_file;
    std::string target;
    std::string element_json;

    ElementDescriptor resolve() const {
        if (!element_json.empty()) return element_from_json(json::parse(read_file(element_json)));
        if (html_file.empty() || target.empty())
            throw UsageError("provide --html with --target, or --element-json");
        bool ambiguous = false;
        ElementDescriptor el = element_from_html(read_file(html_file), target, &ambiguous);
        if (ambiguous)
            std::cerr << "warning: --target matches multiple elements; using the first\n";
        return el;
    }
};

void print_diagnostics(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) std::cout << d << "\n";
}

std::vector<Diagnostic> dedupe(std::vector<Diagnostic> diags) {
    std::vector<Diagnostic> out;
    for (auto& d : diags) {
        bool seen = false;
        for (const auto& o : out)
            if (o.code == d.code && o.path == d.path) seen = true;
        if (!seen) out.push_back(std::move(d));
    }
    return out;
}

int cmd_validate(const std::string& source, bool as_json) {
    std::string raw = read_source(source);
    std::vector<Diagnostic> diags;
    try {
        LenientParseResult parsed = parse_manifest_lenient(raw);
        diags = parsed.diagnostics;
        auto lint = validate_manifest(parsed.manifest);
        diags.insert(diags.end(), lint.begin(), lint.end());
        diags = dedupe(std::move(diags));
    } catch (const ManifestParseError& e) {
        diags.push_back({Severity::Error, e.code, e.path, e.what()});
    }
    int errors = 0, warnings = 0;
    for (const auto& d : diags) {
        if (d.severity == Severity::Error) ++errors;
        if (d.severity == Severity::Warning) ++warnings;
    }
    if (as_json) {
        json out{{"errors", errors}, {"warnings", warnings}};
        json jd = json::array();
        for (const auto& d : diags)
            jd.push_back({{"severity", to_string(d.severity)},
                          {"code", d.code},
                          {"path", d.path},
                          {"message", d.message}});
        out["diagnostics"] = std::move(jd);
        std::cout << out.dump(2) << "\n";
    } else {
        print_diagnostics(diags);
        std::cout << errors << " errors, " << warnings << " warnings\n";
    }
    return errors > 0 ? kExitDenyOrErrors : kExitOk;
}

std::string obligations_str(const Decision& d) {
    std::string out;
    for (const auto& o : d.obligations) {
        if (!out.empty()) out += " ";
        switch (o.kind) {
            case Obligation::Kind::HumanInTheLoop: out += "human_in_the_loop"; break;
            case Obligation::Kind::ThrottleWait: {
                std::ostringstream os;
                os << "throttle_wait=" << o.wait_seconds << "s";
                out += os.str();
                break;
            }
            case Obligation::Kind::ConcurrencySlotRequired:
                out += "concurrency_slot_required";
                break;
        }
    }
    return out;
}

int cmd_check(const std::string& manifest_source, const std::string& verb,
              const ElementArgs& element_args, const std::string& state_file,
              const std::string& defaults_str, std::optional<double> timestamp, bool with_trace,
              bool as_json) {
    Manifest m = parse_manifest(read_source(manifest_source));
    PermissionQuery q;
    q.verb = Verb::from_string(verb);
    q.element = element_args.resolve();
    q.timestamp = timestamp.value_or(now_seconds());
    DefaultPolicy defaults = defaults_str == "deny" ? DefaultPolicy::strict()
                                                    : DefaultPolicy::allow_all();

    Decision d;
    if (!state_file.empty()) {
        EnforcementState state;
        if (std::ifstream probe(state_file); probe)
            state = EnforcementState::from_json(json::parse(read_file(state_file)));
        d = acquire(m, q, state, defaults);
        std::ofstream out(state_file);
        out << state.to_json().dump(2) << "\n";
    } else {
        d = evaluate(m, q, defaults);
    }

    if (as_json) {
        json out{{"outcome", d.outcome == Outcome::Deny ? "deny" : "allow"},
                 {"matched_rule", d.matched_rule ? json(*d.matched_rule) : json(nullptr)}};
        json obs = json::array();
        for (const auto& o : d.obligations) {
            switch (o.kind) {
                case Obligation::Kind::HumanInTheLoop:
                    obs.push_back({{"kind", "human_in_the_loop"}});
                    break;
                case Obligation::Kind::ThrottleWait:
                    obs.push_back({{"kind", "throttle_wait"}, {"seconds", o.wait_seconds}});
                    break;
                case Obligation::Kind::ConcurrencySlotRequired:
                    obs.push_back({{"kind", "concurrency_slot_required"}});
                    break;
            }
        }
        out["obligations"] = std::move(obs);
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << (d.outcome == Outcome::Deny ? "DENY" : "ALLOW");
        if (d.matched_rule)
            std::cout << " (rule " << *d.matched_rule << ")";
        else
            std::cout << " (default)";
        if (!d.obligations.empty()) std::cout << ", obligations: " << obligations_str(d);
        std::cout << "\n";
        if (with_trace) std::cout << explain(m, q, defaults);
    }
    return d.outcome == Outcome::Deny ? kExitDenyOrErrors : kExitOk;
}

int cmd_fetch(const std::string& page_url, const std::string& cache_dir, bool as_json) {
    auto url = Url::parse(page_url);
    if (!url) throw UsageError("invalid URL " + page_url);
    HttpFetcher fetcher;
    std::unique_ptr<CacheStore> cache;
    std::string dir = cache_dir;
    if (dir.empty())
        if (const char* env = std::getenv("AGENTPERM_CACHE_DIR")) dir = env;
    if (!dir.empty())
        cache = std::make_unique<FileCache>(dir);
    else
        cache = std::make_unique<MemoryCache>();

    DiscoveryResult result = discover(*url, fetcher, *cache, now_seconds());
    if (as_json) {
        json out{{"source", to_string(result.source)},
                 {"source_url", result.source_url},
                 {"cache_status", to_string(result.cache_status)}};
        out["manifest"] = result.manifest ? manifest_to_json(*result.manifest) : json(nullptr);
        std::cout << out.dump(2) << "\n";
    } else {
        std::cout << "source: " << to_string(result.source);
        if (!result.source_url.empty()) std::cout << " " << result.source_url;
        std::cout << "\n";
        for (const auto& d : result.diagnostics) std::cerr << d << "\n";
        if (result.manifest) std::cout << serialize_manifest(*result.manifest);
    }
    return result.manifest ? kExitOk : kExitDenyOrErrors;
}

int cmd_generate(const std::string& policies_file, const std::vector<std::string>& inputs,
                 const std::string& out_file, int max_pages, int max_depth, double delay,
                 const std::string& report_format, bool strict,
                 const std::string& last_updated) {
    std::vector<PolicySpec> policies = parse_policies(read_file(policies_file));
    CrawlLimits limits;
    limits.max_pages = max_pages;
    limits.max_depth = max_depth;
    limits.delay_seconds = delay;
    HttpFetcher fetcher;
    std::vector<Diagnostic> diags;
    std::vector<CorpusDocument> corpus = load_corpus(inputs, limits, &fetcher, diags);

    CompileOptions options;
    if (!last_updated.empty()) options.last_updated = last_updated;
    CompilationResult result = compile_policies(policies, corpus, options);

    if (strict && result.report.has_code("UNSYNTHESIZABLE")) {
        std::cerr << result.report.to_text();
        std::cerr << "aborting: unsynthesizable selector under --strict, nothing written\n";
        return kExitDenyOrErrors;
    }

    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw UsageError("cannot write " + out_file);
    out << serialize_manifest(result.manifest);
    out.close();

    for (const auto& d : diags) std::cerr << d << "\n";
    if (report_format == "json")
        std::cout << result.report.to_json().dump(2) << "\n";
    else
        std::cout << result.report.to_text();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"agent-permissions.json toolkit"};
    app.require_subcommand(1);

    // validate
    std::string v_source;
    bool v_json = false;
    auto* validate = app.add_subcommand("validate", "Parse and lint a manifest");
    validate->add_option("source", v_source, "Manifest file or URL")->required();
    validate->add_flag("--json", v_json, "Machine-readable output");

    // check / explain
    std::string c_manifest, c_verb, c_state, c_defaults = "allow";
    ElementArgs c_element;
    std::optional<double> c_timestamp;
    bool c_explain = false, c_json = false;
    auto add_check_options = [&](CLI::App* cmd) {
        cmd->add_option("manifest", c_manifest, "Manifest file or URL")->required();
        cmd->add_option("--verb", c_verb, "Interaction verb")->required();
        cmd->add_option("--html", c_element.html_file, "Fixture HTML file");
        cmd->add_option("--target", c_element.target, "Selector locating the element in --html");
        cmd->add_option("--element-json", c_element.element_json, "Element descriptor JSON file");
        cmd->add_option("--defaults", c_defaults, "Default policy: allow|deny")
            ->check(CLI::IsMember({"allow", "deny"}));
        cmd->add_option("--timestamp", c_timestamp, "Query time, unix seconds (default: now)");
    };
    auto* check = app.add_subcommand("check", "Decide one permission query");
    add_check_options(check);
    check->add_option("--state", c_state, "Enforcement state file (acquire semantics)");
    check->add_flag("--explain", c_explain, "Append the evaluation trace");
    check->add_flag("--json", c_json, "Machine-readable output");
    auto* explain_cmd = app.add_subcommand("explain", "Show the full evaluation trace");
    add_check_options(explain_cmd);

    // fetch
    std::string f_url, f_cache_dir;
    bool f_json = false;
    auto* fetch = app.add_subcommand("fetch", "Discover the manifest for a page URL");
    fetch->add_option("url", f_url, "Page URL")->required();
    fetch->add_option("--cache-dir", f_cache_dir, "Cache directory (or $AGENTPERM_CACHE_DIR)");
    fetch->add_flag("--json", f_json, "Machine-readable output");

    // generate
    std::string g_policies, g_out, g_report = "text", g_last_updated;
    std::vector<std::string> g_inputs;
    int g_max_pages = 50, g_max_depth = 3;
    double g_delay = 1.0;
    bool g_strict = false;
    auto* generate = app.add_subcommand("generate", "Compile policies over a corpus");
    generate->add_option("--policies", g_policies, "Policy file (JSON array)")->required();
    generate->add_option("--input", g_inputs, "HTML files and/or seed URLs")->required();
    generate->add_option("--out", g_out, "Output manifest path")->required();
    generate->add_option("--max-pages", g_max_pages, "Crawl page limit");
    generate->add_option("--max-depth", g_max_depth, "Crawl depth limit");
    generate->add_option("--delay", g_delay, "Politeness delay between fetches, seconds");
    generate->add_option("--report", g_report, "Report format: text|json")
        ->check(CLI::IsMember({"text", "json"}));
    generate->add_flag("--strict", g_strict, "Fail on unsynthesizable selectors");
    generate->add_option("--last-updated", g_last_updated, "RFC 3339 timestamp for metadata");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*validate) return cmd_validate(v_source, v_json);
        if (*check)
            return cmd_check(c_manifest, c_verb, c_element, c_state, c_defaults, c_timestamp,
                             c_explain, c_json);
        if (*explain_cmd) {
            Manifest m = parse_manifest(read_source(c_manifest));
            PermissionQuery q;
            q.verb = Verb::from_string(c_verb);
            q.element = c_element.resolve();
            q.timestamp = c_timestamp.value_or(now_seconds());
            DefaultPolicy defaults =
                c_defaults == "deny" ? DefaultPolicy::strict() : DefaultPolicy::allow_all();
            std::cout << explain(m, q, defaults);
            return kExitOk;
        }
        if (*fetch) return cmd_fetch(f_url, f_cache_dir, f_json);
        if (*generate)
            return cmd_generate(g_policies, g_inputs, g_out, g_max_pages, g_max_depth, g_delay,
                                g_report, g_strict, g_last_updated);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ManifestParseError& e) {
        std::cerr << "error " << e.code << " " << e.path << ": " << e.what() << "\n";
        return kExitDenyOrErrors;
    } catch (const PolicyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SelectorError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const LookupError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDenyOrErrors;
    } catch (const TransportError& e) {
        std::cerr << "network error: " << e.what() << "\n";
        return kExitNetwork;
    } catch (const FetchError& e) {
        std::cerr << "network error: " << e.what() << "\n";
        return kExitNetwork;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
