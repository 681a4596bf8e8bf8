#pragma once

// Staged composition of site and recommender programs, evaluated by
// cascading partial evaluation.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sitespec/evaluator.hpp"
#include "sitespec/program.hpp"

namespace sitespec {

struct Stage {
    std::string name;
    Program program;
};

// When a stage's residual binds `var` to exactly `value`, every entry of
// `then` becomes a truth for later evaluation.
struct BindingAlias {
    std::string var;
    std::string value;
    std::map<std::string, bool> then;
};

enum class ReportSource { binding, annotation };

struct ReportField {
    std::string field;
    ReportSource from = ReportSource::binding;
    std::string key;
};

struct CompositeProgram {
    std::vector<Stage> stages;
    RuleSet aliases;
    std::vector<BindingAlias> binding_aliases;
    std::vector<ReportField> report;
    // Input variables that no stage mentions but aliases may use.
    std::vector<std::string> externals;
    std::optional<nlohmann::json> mining_report;
};

// Static checks: unique stage names, alias variables known, binding alias
// sources produced by some stage and targets used by a later stage.
CompositeProgram merge(std::vector<Stage> stages, RuleSet aliases = {},
                       std::vector<BindingAlias> binding_aliases = {},
                       std::vector<ReportField> report = {}, std::vector<std::string> externals = {});

struct StageResult {
    std::string name;
    Residual residual;
};

struct CascadeResult {
    std::vector<StageResult> per_stage;
    // Truths after aliases and binding aliases (stage-local inferences
    // excluded).
    Assignment sigma;
    TextMap final_bindings;
    // Manifest order; nullopt is an undetermined field.
    std::vector<std::pair<std::string, std::optional<std::string>>> report_fields;
    std::size_t passes = 0;

    bool complete() const;
    nlohmann::json report_json() const;
};

CascadeResult evaluate_composite(const CompositeProgram& c, const Assignment& a, const EvalOptions& options = {});

// Variables with the stages that mention them, as guard or binding.
std::map<std::string, std::vector<std::string>> variable_provenance(const CompositeProgram& c);

// Manifest format: {"stages":[{"name", "program": path | inline program}],
// "aliases": path | rule list, "binding_aliases":[...], "report":[...],
// "externals"?: [...], "mining_report"?: path | object}. Relative paths
// resolve against `base_dir`.
CompositeProgram composite_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
CompositeProgram load_composite(const std::string& path);
// Self-contained form with programs inlined.
nlohmann::json composite_to_json(const CompositeProgram& c);

}  // namespace sitespec
