#pragma once

// Evaluation service: request handling shared by the CLI and the HTTP API.

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "sitespec/evaluator.hpp"
#include "sitespec/graph.hpp"
#include "sitespec/integrator.hpp"

namespace sitespec {

inline constexpr const char* kConfigEnv = "SITESPEC_CONFIG";

// Immutable once constructed; the service swaps whole snapshots.
struct Snapshot {
    CompositeProgram composite;
    NormalizationConfig config;
    EvalOptions options;
};

// Config precedence: explicit path, the manifest's "normalization" entry,
// the SITESPEC_CONFIG environment variable, built-in defaults.
NormalizationConfig resolve_config(const std::string& explicit_path, const nlohmann::json* manifest = nullptr,
                                   const std::string& base_dir = ".");

std::shared_ptr<const Snapshot> load_snapshot(const std::string& manifest_path, const std::string& config_path = {},
                                              const EvalOptions& options = {});
// A lone program wrapped as a one-stage composite named "main".
std::shared_ptr<const Snapshot> program_snapshot(const Program& program, const NormalizationConfig& config,
                                                 const RuleSet& rules = {}, const EvalOptions& options = {});

struct EvalRequest {
    Assignment assignments;
    std::string query;
};

// Body {"assignments"?: {var: bool}, "query"?: text}. Throws FormatError.
EvalRequest parse_eval_request(const nlohmann::json& body);

// Explicit assignments plus every query token and the whole normalized
// query set True. Throws ConflictError.
Assignment request_assignment(const EvalRequest& request, const NormalizationConfig& config);
std::vector<std::string> query_variables(const std::string& query, const NormalizationConfig& config);

// One stage renders as its own tree; several stages hang under a synthetic
// composite root.
nlohmann::json cascade_tree_json(const CascadeResult& result, bool focused = false);

// {tree, focus, inferred, complete, report_fields, bindings, stages,
// query_variables, query_matched}
nlohmann::json evaluate_response(const Snapshot& snapshot, const EvalRequest& request);

nlohmann::json vars_response(const Snapshot& snapshot);
nlohmann::json meta_response(const Snapshot& snapshot);

// Structured error body: {"error": {kind, message, variable?, chain?, ...}}.
nlohmann::json error_json(const std::exception& e);

struct HttpResponse {
    int status = 200;
    std::string body;
};

class Service {
public:
    using Loader = std::function<std::shared_ptr<const Snapshot>()>;

    explicit Service(std::shared_ptr<const Snapshot> snapshot, Loader loader = {});

    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

    std::shared_ptr<const Snapshot> snapshot() const;
    void reload(std::shared_ptr<const Snapshot> next);

    // Blocks until stop().
    void listen(const std::string& host, int port);
    // Binds and returns the port without blocking; run with serve_bound().
    int bind(const std::string& host, int port);
    void serve_bound();
    void stop();
    bool running() const;

    ~Service();

private:
    struct Server;

    mutable std::mutex mutex_;
    std::shared_ptr<const Snapshot> snapshot_;
    Loader loader_;
    std::unique_ptr<Server> server_;
};

}  // namespace sitespec
