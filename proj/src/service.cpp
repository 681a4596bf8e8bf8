#include "sitespec/service.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "httplib.h"
#include "sitespec/error.hpp"
#include "sitespec/reconstructor.hpp"

namespace sitespec {

using nlohmann::json;
namespace fs = std::filesystem;

NormalizationConfig resolve_config(const std::string& explicit_path, const json* manifest, const std::string& base_dir) {
    if (!explicit_path.empty()) return NormalizationConfig::load(explicit_path);
    if (manifest) {
        if (auto it = manifest->find("normalization"); it != manifest->end() && !it->is_null()) {
            if (!it->is_string()) return NormalizationConfig::from_json(*it);
            fs::path p(it->get<std::string>());
            return NormalizationConfig::load((p.is_absolute() ? p : fs::path(base_dir) / p).string());
        }
    }
    if (const char* env = std::getenv(kConfigEnv); env && *env) return NormalizationConfig::load(env);
    return {};
}

std::shared_ptr<const Snapshot> load_snapshot(const std::string& manifest_path, const std::string& config_path,
                                              const EvalOptions& options) {
    std::ifstream in(manifest_path);
    if (!in) throw Error("cannot open manifest '" + manifest_path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(manifest_path + ": " + e.what());
    }
    auto base = fs::path(manifest_path).parent_path().string();
    if (base.empty()) base = ".";
    auto snap = std::make_shared<Snapshot>();
    snap->composite = composite_from_json(j, base);
    snap->config = resolve_config(config_path, &j, base);
    snap->options = options;
    return snap;
}

std::shared_ptr<const Snapshot> program_snapshot(const Program& program, const NormalizationConfig& config,
                                                 const RuleSet& rules, const EvalOptions& options) {
    auto snap = std::make_shared<Snapshot>();
    // Rules on a lone program may mention inputs the program never uses.
    auto externals = rules.variables();
    snap->composite = merge({{"main", program}}, rules, {}, {}, std::move(externals));
    snap->config = config;
    snap->options = options;
    return snap;
}

EvalRequest parse_eval_request(const json& body) {
    if (!body.is_object()) throw FormatError("request body must be a JSON object");
    EvalRequest req;
    if (auto it = body.find("assignments"); it != body.end() && !it->is_null()) {
        req.assignments = Assignment::from_json(*it);
    }
    if (auto it = body.find("query"); it != body.end() && !it->is_null()) {
        if (!it->is_string()) throw FormatError("query must be a string");
        req.query = it->get<std::string>();
    }
    return req;
}

std::vector<std::string> query_variables(const std::string& query, const NormalizationConfig& config) {
    const std::string normalized = normalize_label(query, config);
    std::vector<std::string> vars = label_tokens(normalized);
    if (vars.size() > 1) vars.push_back(normalized);
    return vars;
}

Assignment request_assignment(const EvalRequest& request, const NormalizationConfig& config) {
    Assignment a = request.assignments;
    for (const auto& v : query_variables(request.query, config)) a.set(v, true);
    return a;
}

json cascade_tree_json(const CascadeResult& result, bool focused) {
    auto stage_tree = [&](const StageResult& s) {
        auto tree = render_tree(s.residual);
        return focused ? focus(tree) : tree;
    };
    if (result.per_stage.size() == 1) return stage_tree(result.per_stage.front()).to_json();
    json children = json::array();
    for (const auto& s : result.per_stage) {
        json t = stage_tree(s).to_json();
        t["stage"] = s.name;
        children.push_back(std::move(t));
    }
    return {{"guard", "root"}, {"kind", "composite"}, {"children", std::move(children)}};
}

json evaluate_response(const Snapshot& snapshot, const EvalRequest& request) {
    const Assignment a = request_assignment(request, snapshot.config);
    const CascadeResult result = evaluate_composite(snapshot.composite, a, snapshot.options);

    Assignment inferred = result.sigma;
    for (const auto& s : result.per_stage) inferred.merge(s.residual.inferred);

    json stages = json::array();
    for (const auto& s : result.per_stage) {
        stages.push_back({{"name", s.name},
                          {"complete", s.residual.complete},
                          {"nodes", node_count(s.residual.program)}});
    }

    const auto qvars = query_variables(request.query, snapshot.config);
    json matched = nullptr;
    if (!qvars.empty()) {
        // Matched when some query variable, directly or through aliases,
        // reaches a guard of the composite.
        const auto provenance = variable_provenance(snapshot.composite);
        const Assignment closed = close_assignment(request_assignment({{}, request.query}, snapshot.config),
                                                   snapshot.composite.aliases);
        bool hit = false;
        for (const auto& [var, value] : closed.values()) {
            if (!value) continue;
            auto it = provenance.find(var);
            if (it != provenance.end() && !it->second.empty()) hit = true;
        }
        matched = hit;
    }

    return {{"tree", cascade_tree_json(result)},
            {"focus", cascade_tree_json(result, true)},
            {"inferred", inferred.to_json()},
            {"complete", result.complete()},
            {"report_fields", result.report_json()},
            {"bindings", result.final_bindings},
            {"stages", std::move(stages)},
            {"query_variables", qvars},
            {"query_matched", matched}};
}

json vars_response(const Snapshot& snapshot) {
    std::set<std::string> guards, bound;
    for (const auto& s : snapshot.composite.stages) {
        for (auto& v : guard_variables(s.program)) guards.insert(std::move(v));
        for (auto& v : binding_variables(s.program)) bound.insert(std::move(v));
    }
    json vars = json::array();
    for (const auto& [name, stages] : variable_provenance(snapshot.composite)) {
        json roles = json::array();
        if (guards.count(name)) roles.push_back("guard");
        if (bound.count(name)) roles.push_back("binding");
        if (roles.empty()) roles.push_back("external");
        vars.push_back({{"name", name}, {"stages", stages}, {"roles", std::move(roles)}});
    }
    return {{"variables", std::move(vars)}};
}

json meta_response(const Snapshot& snapshot) {
    json stages = json::array();
    for (const auto& s : snapshot.composite.stages) {
        stages.push_back({{"name", s.name},
                          {"nodes", node_count(s.program)},
                          {"unfolded_nodes", unfolded_size(s.program)},
                          {"guards", guard_variables(s.program).size()}});
    }
    return {{"stages", std::move(stages)},
            {"aliases", snapshot.composite.aliases.rules.size()},
            {"binding_aliases", snapshot.composite.binding_aliases.size()},
            {"mining_report", snapshot.composite.mining_report ? *snapshot.composite.mining_report : json(nullptr)}};
}

json error_json(const std::exception& e) {
    json err{{"message", e.what()}};
    if (const auto* c = dynamic_cast<const ConflictError*>(&e)) {
        err["kind"] = "conflict";
        err["variable"] = c->variable();
        err["chain"] = c->chain();
        if (!c->selector().empty()) err["selector"] = c->selector();
        if (!c->stage().empty()) err["stage"] = c->stage();
    } else if (dynamic_cast<const FormatError*>(&e)) {
        err["kind"] = "format";
    } else if (dynamic_cast<const CompositeError*>(&e)) {
        err["kind"] = "composite";
    } else if (dynamic_cast<const MiningError*>(&e)) {
        err["kind"] = "mining";
    } else if (dynamic_cast<const IngestError*>(&e)) {
        err["kind"] = "ingest";
    } else {
        err["kind"] = "error";
    }
    return {{"error", std::move(err)}};
}

// ---------------------------------------------------------------------------
// Service

struct Service::Server {
    httplib::Server http;
};

Service::Service(std::shared_ptr<const Snapshot> snapshot, Loader loader)
    : snapshot_(std::move(snapshot)), loader_(std::move(loader)) {
    if (!snapshot_) throw Error("service needs a snapshot");
}

Service::~Service() { stop(); }

std::shared_ptr<const Snapshot> Service::snapshot() const {
    std::lock_guard lock(mutex_);
    return snapshot_;
}

void Service::reload(std::shared_ptr<const Snapshot> next) {
    if (!next) throw Error("cannot reload an empty snapshot");
    std::lock_guard lock(mutex_);
    snapshot_ = std::move(next);
}

namespace {

HttpResponse json_response(int status, const json& body) { return {status, body.dump()}; }

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("malformed JSON body: ") + e.what());
    }
}

}  // namespace

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    // Each request works on the snapshot current when it arrived.
    const auto snap = snapshot();
    try {
        if (method == "GET" && path == "/vars") return json_response(200, vars_response(*snap));
        if (method == "GET" && path == "/program/meta") return json_response(200, meta_response(*snap));
        if (method == "POST" && path == "/evaluate") {
            return json_response(200, evaluate_response(*snap, parse_eval_request(parse_body(body))));
        }
        if (method == "POST" && path == "/reload") {
            if (!loader_) return json_response(404, {{"error", {{"kind", "not_found"}, {"message", "reload disabled"}}}});
            reload(loader_());
            return json_response(200, meta_response(*snapshot()));
        }
        return json_response(404, {{"error", {{"kind", "not_found"}, {"message", method + " " + path}}}});
    } catch (const ConflictError& e) {
        return json_response(409, error_json(e));
    } catch (const FormatError& e) {
        return json_response(400, error_json(e));
    } catch (const std::exception& e) {
        return json_response(500, error_json(e));
    }
}

int Service::bind(const std::string& host, int port) {
    if (!server_) {
        server_ = std::make_unique<Server>();
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            const HttpResponse r = handle(req.method, req.path, req.body);
            res.status = r.status;
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_content(r.body, "application/json");
        };
        server_->http.Get(".*", route);
        server_->http.Post(".*", route);
        server_->http.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", "*");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
    }
    if (port == 0) {
        const int bound = server_->http.bind_to_any_port(host);
        if (bound < 0) throw Error("cannot bind " + host);
        return bound;
    }
    if (!server_->http.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Service::serve_bound() {
    if (!server_) throw Error("service is not bound");
    server_->http.listen_after_bind();
}

void Service::listen(const std::string& host, int port) {
    bind(host, port);
    serve_bound();
}

void Service::stop() {
    if (server_) server_->http.stop();
}

bool Service::running() const { return server_ && server_->http.is_running(); }

}  // namespace sitespec
