#include "sitespec/integrator.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "sitespec/error.hpp"

namespace sitespec {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::set<std::string> stage_variables(const Stage& s) {
    std::set<std::string> vars;
    for (auto& v : guard_variables(s.program)) vars.insert(std::move(v));
    for (auto& v : binding_variables(s.program)) vars.insert(std::move(v));
    return vars;
}

}  // namespace

CompositeProgram merge(std::vector<Stage> stages, RuleSet aliases, std::vector<BindingAlias> binding_aliases,
                       std::vector<ReportField> report, std::vector<std::string> externals) {
    std::set<std::string> names;
    for (const auto& s : stages) {
        if (s.name.empty()) throw CompositeError("stage without a name");
        if (!names.insert(s.name).second) throw CompositeError("duplicate stage name '" + s.name + "'");
    }

    std::vector<std::set<std::string>> guards(stages.size()), bound(stages.size());
    std::set<std::string> known(externals.begin(), externals.end());
    for (std::size_t i = 0; i < stages.size(); ++i) {
        for (auto& v : guard_variables(stages[i].program)) guards[i].insert(std::move(v));
        for (auto& v : binding_variables(stages[i].program)) bound[i].insert(std::move(v));
        auto all = stage_variables(stages[i]);
        known.insert(all.begin(), all.end());
    }

    for (const auto& rule : aliases.rules) {
        for (const auto* var : {&rule.if_var, &rule.then_var}) {
            if (!known.count(*var)) {
                throw CompositeError("alias variable '" + *var + "' does not occur in any stage (rule " +
                                     rule.describe() + ")");
            }
        }
    }

    for (const auto& ba : binding_aliases) {
        std::size_t producer = stages.size();
        for (std::size_t i = 0; i < stages.size(); ++i) {
            if (bound[i].count(ba.var)) {
                producer = i;
                break;
            }
        }
        if (producer == stages.size()) {
            throw CompositeError("binding alias source '" + ba.var + "' is not bound by any stage");
        }
        for (const auto& [target, value] : ba.then) {
            (void)value;
            bool found = std::find(externals.begin(), externals.end(), target) != externals.end();
            for (std::size_t i = producer + 1; i < stages.size() && !found; ++i) found = guards[i].count(target) > 0;
            if (!found) {
                throw CompositeError("unresolvable binding alias target '" + target + "' for " + ba.var + "=\"" +
                                     ba.value + "\"");
            }
        }
    }

    CompositeProgram c;
    c.stages = std::move(stages);
    c.aliases = std::move(aliases);
    c.binding_aliases = std::move(binding_aliases);
    c.report = std::move(report);
    c.externals = std::move(externals);
    return c;
}

bool CascadeResult::complete() const {
    for (const auto& s : per_stage) {
        if (!s.residual.complete) return false;
    }
    return true;
}

json CascadeResult::report_json() const {
    json fields = json::array();
    for (const auto& [field, value] : report_fields) {
        fields.push_back({{"field", field}, {"value", value ? json(*value) : json(nullptr)}});
    }
    return fields;
}

CascadeResult evaluate_composite(const CompositeProgram& c, const Assignment& a, const EvalOptions& options) {
    CascadeResult result;
    try {
        result.sigma = close_assignment(a, c.aliases);
    } catch (const ConflictError& e) {
        throw e.with_stage("aliases");
    }

    // Each pass evaluates every stage in order; a stage's bindings update the
    // truths seen by the stages after it. Stops once a whole pass leaves the
    // truths unchanged, so every stage of the last pass saw the same input.
    bool changed = true;
    while (changed) {
        changed = false;
        ++result.passes;
        result.per_stage.clear();
        result.final_bindings.clear();
        std::map<std::string, std::string> binder;
        for (const auto& stage : c.stages) {
            Residual r;
            try {
                r = partially_evaluate(stage.program, result.sigma, options);
            } catch (const ConflictError& e) {
                throw e.with_stage(stage.name);
            }
            for (const auto& [k, v] : r.bindings) {
                auto [it, inserted] = result.final_bindings.emplace(k, v);
                if (!inserted && it->second != v) {
                    throw ConflictError(k, {binder[k] + " binds " + k + "=\"" + it->second + "\"",
                                            stage.name + " binds " + k + "=\"" + v + "\""},
                                        {}, stage.name);
                }
                binder.emplace(k, stage.name);
            }

            Assignment next = result.sigma;
            try {
                for (const auto& ba : c.binding_aliases) {
                    auto it = r.bindings.find(ba.var);
                    if (it == r.bindings.end() || it->second != ba.value) continue;
                    for (const auto& [var, value] : ba.then) next.set(var, value);
                }
                next = close_assignment(next, c.aliases);
            } catch (const ConflictError& e) {
                throw e.with_stage(stage.name);
            }
            result.per_stage.push_back({stage.name, std::move(r)});
            if (!(next == result.sigma)) {
                result.sigma = std::move(next);
                changed = true;
            }
        }
    }

    for (const auto& f : c.report) {
        std::optional<std::string> value;
        if (f.from == ReportSource::binding) {
            auto it = result.final_bindings.find(f.key);
            if (it != result.final_bindings.end()) value = it->second;
        } else {
            for (const auto& s : result.per_stage) {
                for (const auto& node : selected_nodes(s.residual.program)) {
                    auto it = node->annotations().find(f.key);
                    if (it != node->annotations().end()) {
                        value = it->second;
                        break;
                    }
                }
                if (value) break;
            }
        }
        result.report_fields.emplace_back(f.field, std::move(value));
    }
    return result;
}

std::map<std::string, std::vector<std::string>> variable_provenance(const CompositeProgram& c) {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& s : c.stages) {
        for (const auto& v : stage_variables(s)) out[v].push_back(s.name);
    }
    for (const auto& v : c.externals) out.emplace(v, std::vector<std::string>{});
    return out;
}

// ---------------------------------------------------------------------------
// Manifest files

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

fs::path resolve(const std::string& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : fs::path(base) / path;
}

ReportSource source_from_string(const std::string& s) {
    if (s == "binding") return ReportSource::binding;
    if (s == "annotation") return ReportSource::annotation;
    throw FormatError("report source must be 'binding' or 'annotation', got '" + s + "'");
}

}  // namespace

CompositeProgram composite_from_json(const json& j, const std::string& base_dir) {
    if (!j.is_object()) throw FormatError("composite manifest must be a JSON object");
    try {
        std::vector<Stage> stages;
        for (const auto& js : j.at("stages")) {
            Stage s;
            s.name = js.at("name").get<std::string>();
            const json& jp = js.at("program");
            if (jp.is_string()) {
                s.program = load_program(resolve(base_dir, jp.get<std::string>()).string()).program;
            } else {
                s.program = program_from_json(jp).program;
            }
            stages.push_back(std::move(s));
        }

        RuleSet aliases;
        if (auto it = j.find("aliases"); it != j.end() && !it->is_null()) {
            aliases = it->is_string() ? RuleSet::load(resolve(base_dir, it->get<std::string>()).string())
                                      : RuleSet::from_json(*it);
        }

        std::vector<BindingAlias> bas;
        for (const auto& jb : j.value("binding_aliases", json::array())) {
            BindingAlias ba;
            ba.var = jb.at("var").get<std::string>();
            ba.value = jb.at("value").get<std::string>();
            for (const auto& [k, v] : jb.at("then").items()) {
                if (!v.is_boolean()) throw FormatError("binding alias value for '" + k + "' must be a boolean");
                ba.then[k] = v.get<bool>();
            }
            bas.push_back(std::move(ba));
        }

        std::vector<ReportField> report;
        for (const auto& jr : j.value("report", json::array())) {
            report.push_back({jr.at("field").get<std::string>(), source_from_string(jr.at("from").get<std::string>()),
                              jr.at("key").get<std::string>()});
        }

        auto externals = j.value("externals", std::vector<std::string>{});
        CompositeProgram c =
            merge(std::move(stages), std::move(aliases), std::move(bas), std::move(report), std::move(externals));

        if (auto it = j.find("mining_report"); it != j.end() && !it->is_null()) {
            c.mining_report = it->is_string() ? read_json_file(resolve(base_dir, it->get<std::string>())) : *it;
        }
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad composite manifest: ") + e.what());
    }
}

CompositeProgram load_composite(const std::string& path) {
    const json j = read_json_file(path);
    const auto base = fs::path(path).parent_path();
    return composite_from_json(j, base.empty() ? std::string(".") : base.string());
}

json composite_to_json(const CompositeProgram& c) {
    json stages = json::array();
    for (const auto& s : c.stages) stages.push_back({{"name", s.name}, {"program", program_to_json(s.program)}});
    json bas = json::array();
    for (const auto& ba : c.binding_aliases) {
        json then = json::object();
        for (const auto& [k, v] : ba.then) then[k] = v;
        bas.push_back({{"var", ba.var}, {"value", ba.value}, {"then", then}});
    }
    json report = json::array();
    for (const auto& f : c.report) {
        report.push_back({{"field", f.field},
                          {"from", f.from == ReportSource::binding ? "binding" : "annotation"},
                          {"key", f.key}});
    }
    json j{{"stages", stages}, {"aliases", c.aliases.to_json()}, {"binding_aliases", bas}, {"report", report}};
    if (!c.externals.empty()) j["externals"] = c.externals;
    if (c.mining_report) j["mining_report"] = *c.mining_report;
    return j;
}

}  // namespace sitespec
