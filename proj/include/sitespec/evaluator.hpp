#pragma once

// Three-valued partial evaluation of branching programs, with forward
// chaining of ground implication rules over the input assignment.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sitespec/program.hpp"

namespace sitespec {

enum class Truth { Unknown, True, False };

// Variables absent from the map are Unknown.
class Assignment {
public:
    Assignment() = default;
    Assignment(std::initializer_list<std::pair<const std::string, bool>> values);

    Truth get(const std::string& var) const;
    // Throws ConflictError when `var` already holds the opposite value.
    void set(const std::string& var, bool value);
    void merge(const Assignment& other);

    const std::map<std::string, bool>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    static Assignment from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    friend bool operator==(const Assignment&, const Assignment&) = default;

private:
    std::map<std::string, bool> values_;
};

struct Implication {
    std::string if_var;
    bool if_value = true;
    std::string then_var;
    bool then_value = true;

    std::string describe() const;
};

struct RuleSet {
    std::vector<Implication> rules;

    // JSON list of {"if": var, "if_value"?: bool, "then": {var: bool}}.
    static RuleSet from_json(const nlohmann::json& j);
    static RuleSet load(const std::string& path);
    nlohmann::json to_json() const;
    std::vector<std::string> variables() const;
};

struct ClosureStats {
    std::size_t firings = 0;
};

Assignment close_assignment(const Assignment& a, const RuleSet& rules, ClosureStats* stats = nullptr);

struct EvalOptions {
    // A true guard in an exclusive selector records its sibling guards as
    // false in the residual's `inferred`, and two true guards in one live
    // exclusive selector are a conflict. Off: arms read as an else-if chain,
    // so the first true arm wins once every arm before it is false.
    bool exclusive_implication = true;
    bool keep_empty_selectors = false;
};

struct Residual {
    Program program;
    // Input values plus the sibling guards falsified by exclusive choices on
    // live paths. The residual drops those sibling arms only; re-evaluating
    // under `inferred` prunes same-named guards elsewhere.
    Assignment inferred;
    // Bindings of leaves reached without passing a remaining guard. A
    // variable bound to different values by two such leaves is left out and
    // listed in `ambiguous`.
    TextMap bindings;
    std::vector<std::string> ambiguous;
    bool complete = false;
};

Residual partially_evaluate(const Program& program, const Assignment& a, const EvalOptions& options = {});

// Brute-force reference: filters the full path enumeration of `program`
// under `a` without building a residual.
std::vector<ProgramPath> residual_paths_oracle(const Program& program, const Assignment& a,
                                               const EvalOptions& options = {});

// Nodes reachable from the root through unconditional inclusive arms only
// (the root itself included).
std::vector<NodePtr> selected_nodes(const Program& program);

}  // namespace sitespec
