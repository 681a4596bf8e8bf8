#include "sitespec/cli.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sitespec/error.hpp"
#include "sitespec/evaluator.hpp"
#include "sitespec/graph.hpp"
#include "sitespec/integrator.hpp"
#include "sitespec/miner.hpp"
#include "sitespec/program.hpp"
#include "sitespec/reconstructor.hpp"
#include "sitespec/service.hpp"

namespace sitespec {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << text;
}

bool parse_bool(const std::string& text, const std::string& context) {
    if (text == "true" || text == "1" || text == "T") return true;
    if (text == "false" || text == "0" || text == "F") return false;
    throw UsageError("expected true or false in '" + context + "'");
}

// Shared inputs of eval, paths and serve.
struct SourceOptions {
    std::string program;
    std::string manifest;
    std::string config;
    std::string rules;
    bool no_implication = false;
    bool keep_empty = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--program", program, "Program file");
        cmd->add_option("--manifest", manifest, "Composite manifest");
        cmd->add_option("--config", config, "Normalization config (default from $SITESPEC_CONFIG)");
        cmd->add_option("--rules", rules, "Implication rules (JSON list)");
        cmd->add_flag("--no-implication", no_implication, "Do not falsify siblings of a true exclusive guard");
        cmd->add_flag("--keep-empty", keep_empty, "Keep selectors whose arms were all pruned");
    }

    EvalOptions options() const { return {!no_implication, keep_empty}; }

    std::shared_ptr<const Snapshot> snapshot() const {
        if (program.empty() == manifest.empty()) throw UsageError("give exactly one of --program or --manifest");
        const RuleSet extra = rules.empty() ? RuleSet{} : RuleSet::load(rules);
        if (!program.empty()) {
            return program_snapshot(load_program(program).program, resolve_config(config), extra, options());
        }
        auto snap = load_snapshot(manifest, config, options());
        if (extra.rules.empty()) return snap;
        auto copy = std::make_shared<Snapshot>(*snap);
        auto aliases = copy->composite.aliases;
        aliases.rules.insert(aliases.rules.end(), extra.rules.begin(), extra.rules.end());
        auto externals = copy->composite.externals;
        for (auto& v : extra.variables()) externals.push_back(std::move(v));
        auto mining = copy->composite.mining_report;
        copy->composite = merge(copy->composite.stages, std::move(aliases), copy->composite.binding_aliases,
                                copy->composite.report, std::move(externals));
        copy->composite.mining_report = std::move(mining);
        return copy;
    }
};

struct AssignOptions {
    std::vector<std::string> sets;
    std::string assign_file;
    std::string query;

    void add(CLI::App* cmd) {
        cmd->add_option("--set", sets, "var=true|false (repeatable)");
        cmd->add_option("--assign", assign_file, "JSON file {var: bool}");
        cmd->add_option("--query", query, "Free-text query; each normalized token is set true");
    }

    EvalRequest request() const {
        EvalRequest req;
        if (!assign_file.empty()) req.assignments = Assignment::from_json(read_json(assign_file));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) throw UsageError("--set expects var=value, got '" + s + "'");
            req.assignments.set(s.substr(0, eq), parse_bool(s.substr(eq + 1), s));
        }
        req.query = query;
        return req;
    }
};

json path_json(const std::vector<ProgramPath>& paths) {
    json arr = json::array();
    for (const auto& p : paths) {
        json leaf{{"origin", p.leaf->origin}};
        if (!p.leaf->leaf().url.empty()) leaf["url"] = p.leaf->leaf().url;
        if (!p.leaf->leaf().bindings.empty()) leaf["bindings"] = p.leaf->leaf().bindings;
        arr.push_back({{"guards", p.guards}, {"leaf", std::move(leaf)}});
    }
    return arr;
}

}  // namespace

int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Site-schema partial evaluation engine", "sitespec"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_dump, ingest_out, ingest_config;
    bool ingest_strict = false;
    auto* ingest = app.add_subcommand("ingest", "Build a site graph from a JSON-lines crawl dump");
    ingest->add_option("dump", ingest_dump, "Crawl dump (JSON lines)")->required();
    ingest->add_option("-o,--output", ingest_out, "Graph file to write")->required();
    ingest->add_option("--config", ingest_config, "Normalization config (default from $SITESPEC_CONFIG)");
    ingest->add_flag("--strict", ingest_strict, "Fail when validation reports errors");

    // mine
    std::string mine_in, mine_out, mine_report;
    MineOptions mine_opts;
    auto* mine_cmd = app.add_subcommand("mine", "Compress a site graph (dedup, typing, subsumption)");
    mine_cmd->add_option("graph", mine_in, "Input graph")->required();
    mine_cmd->add_option("-o,--output", mine_out, "Mined graph to write")->required();
    mine_cmd->add_option("--report", mine_report, "Also write the mining report here");
    mine_cmd->add_option("--max-cover", mine_opts.max_cover, "Largest cover set tried by subsumption")
        ->check(CLI::Range(1, 8));
    mine_cmd->add_flag("--lossy", mine_opts.lossy, "Report near-merges that ignore incoming edges");

    // build
    std::string build_in, build_out;
    bool build_pseudo = false;
    auto* build = app.add_subcommand("build", "Compile a site graph into a program");
    build->add_option("graph", build_in, "Input graph")->required();
    build->add_option("-o,--output", build_out, "Program file to write");
    build->add_flag("--pseudo", build_pseudo, "Print the program as nested if / else-if");

    // merge
    std::string merge_in, merge_out;
    auto* merge_cmd = app.add_subcommand("merge", "Check a composite manifest and write it self-contained");
    merge_cmd->add_option("manifest", merge_in, "Composite manifest")->required();
    merge_cmd->add_option("-o,--output", merge_out, "Composite file to write")->required();

    // eval
    SourceOptions eval_src;
    AssignOptions eval_assign;
    bool eval_report = false, eval_focus = false, eval_response = false, eval_pseudo = false;
    std::string eval_pages;
    auto* eval = app.add_subcommand("eval", "Partially evaluate a program or composite");
    eval_src.add(eval);
    eval_assign.add(eval);
    eval->add_flag("--report", eval_report, "Print the report fields as text");
    eval->add_flag("--focus", eval_focus, "Print only selected subtrees and their ancestors");
    eval->add_flag("--response", eval_response, "Print the full service response");
    eval->add_flag("--pseudo", eval_pseudo, "Print each residual as nested if / else-if");
    eval->add_option("--pages", eval_pages, "Write static pages of the residual tree to this directory");

    // paths
    SourceOptions paths_src;
    AssignOptions paths_assign;
    bool paths_residual = false;
    auto* paths = app.add_subcommand("paths", "List the residual paths by brute-force enumeration");
    paths_src.add(paths);
    paths_assign.add(paths);
    paths->add_flag("--residual", paths_residual, "Enumerate the evaluated residual instead of the oracle");

    // serve
    SourceOptions serve_src;
    std::string serve_host = "127.0.0.1";
    int serve_port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the HTTP evaluation service");
    serve_src.add(serve);
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--port", serve_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*ingest) {
            const auto cfg = resolve_config(ingest_config);
            std::ifstream in(ingest_dump);
            if (!in) throw Error("cannot open '" + ingest_dump + "'");
            const SiteGraph g = ingest_crawl(in, cfg);
            const auto report = validate(g);
            save_graph(g, ingest_out);
            out << json{{"nodes", g.nodes.size()}, {"edges", g.edges.size()}, {"validation", report.to_json()}}.dump(2)
                << "\n";
            if (ingest_strict && !report.ok()) return kExitError;
        } else if (*mine_cmd) {
            const auto result = mine(load_graph(mine_in), mine_opts);
            save_graph(result.graph, mine_out);
            const std::string text = result.report.to_json().dump(2) + "\n";
            if (!mine_report.empty()) write_text(mine_report, text);
            out << text;
        } else if (*build) {
            const auto result = build_program(load_graph(build_in));
            if (!build_out.empty()) save_program(build_out, result.program, result.cross_references);
            if (build_pseudo) {
                out << render_pseudo(result.program);
            } else {
                out << json{{"nodes", node_count(result.program)},
                            {"unfolded_nodes", unfolded_size(result.program)},
                            {"cross_references", result.cross_references.size()}}
                           .dump(2)
                    << "\n";
            }
        } else if (*merge_cmd) {
            const auto c = load_composite(merge_in);
            write_text(merge_out, composite_to_json(c).dump(2) + "\n");
            json stages = json::array();
            for (const auto& s : c.stages) stages.push_back({{"name", s.name}, {"nodes", node_count(s.program)}});
            out << json{{"stages", stages}}.dump(2) << "\n";
        } else if (*eval) {
            const auto req = eval_assign.request();
            const auto snap = eval_src.snapshot();
            if (eval_response) {
                out << evaluate_response(*snap, req).dump(2) << "\n";
                return kExitOk;
            }
            const auto result = evaluate_composite(snap->composite, request_assignment(req, snap->config), snap->options);
            if (!eval_pages.empty()) {
                if (result.per_stage.size() == 1) {
                    emit_pages(render_tree(result.per_stage.front().residual), eval_pages);
                } else {
                    for (const auto& s : result.per_stage) {
                        emit_pages(render_tree(s.residual), (fs::path(eval_pages) / s.name).string());
                    }
                }
            }
            if (eval_report) {
                out << render_report(result);
            } else if (eval_pseudo) {
                for (const auto& s : result.per_stage) {
                    if (result.per_stage.size() > 1) out << "/* stage " << s.name << " */\n";
                    out << render_pseudo(s.residual.program);
                }
            } else {
                out << cascade_tree_json(result, eval_focus).dump(2) << "\n";
            }
        } else if (*paths) {
            const auto req = paths_assign.request();
            const auto snap = paths_src.snapshot();
            const auto a = request_assignment(req, snap->config);
            // The cascade supplies the truths each stage ends up seeing.
            const auto result = evaluate_composite(snap->composite, a, snap->options);
            json by_stage = json::object();
            for (std::size_t i = 0; i < snap->composite.stages.size(); ++i) {
                const auto& s = snap->composite.stages[i];
                const auto p = paths_residual ? enumerate_paths(result.per_stage[i].residual.program)
                                              : residual_paths_oracle(s.program, result.sigma, snap->options);
                by_stage[s.name] = path_json(p);
            }
            out << (snap->composite.stages.size() == 1 ? by_stage.begin().value() : by_stage).dump(2) << "\n";
        } else if (*serve) {
            const auto snap = serve_src.snapshot();
            Service::Loader loader;
            if (!serve_src.manifest.empty()) loader = [src = serve_src] { return src.snapshot(); };
            Service service(snap, loader);
            const int port = service.bind(serve_host, serve_port);
            out << "listening on " << serve_host << ":" << port << std::endl;
            service.serve_bound();
        }
    } catch (const UsageError& e) {
        err << error_json(e).dump() << "\n";
        return kExitUsage;
    } catch (const ConflictError& e) {
        err << error_json(e).dump() << "\n";
        return kExitConflict;
    } catch (const std::exception& e) {
        err << error_json(e).dump() << "\n";
        return kExitError;
    }
    return kExitOk;
}

}  // namespace sitespec
