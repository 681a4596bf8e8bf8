#include "sitespec/evaluator.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <functional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "sitespec/error.hpp"

namespace sitespec {

using nlohmann::json;

namespace {

std::string bool_text(bool v) { return v ? "true" : "false"; }

}  // namespace

// ---------------------------------------------------------------------------
// Assignment

Assignment::Assignment(std::initializer_list<std::pair<const std::string, bool>> values) {
    for (const auto& [k, v] : values) set(k, v);
}

Truth Assignment::get(const std::string& var) const {
    auto it = values_.find(var);
    if (it == values_.end()) return Truth::Unknown;
    return it->second ? Truth::True : Truth::False;
}

void Assignment::set(const std::string& var, bool value) {
    auto [it, inserted] = values_.emplace(var, value);
    if (!inserted && it->second != value) {
        throw ConflictError(var, {var + "=" + bool_text(it->second), var + "=" + bool_text(value)});
    }
}

void Assignment::merge(const Assignment& other) {
    for (const auto& [k, v] : other.values_) set(k, v);
}

Assignment Assignment::from_json(const json& j) {
    if (!j.is_object()) throw FormatError("assignment must be a JSON object of booleans");
    Assignment a;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_boolean()) throw FormatError("assignment value for '" + k + "' must be a boolean");
        a.set(k, v.get<bool>());
    }
    return a;
}

json Assignment::to_json() const {
    json j = json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
}

// ---------------------------------------------------------------------------
// Rules

std::string Implication::describe() const {
    return "if " + if_var + "=" + bool_text(if_value) + " then " + then_var + "=" + bool_text(then_value);
}

RuleSet RuleSet::from_json(const json& j) {
    if (!j.is_array()) throw FormatError("rule file must be a JSON list");
    RuleSet rs;
    try {
        for (const auto& jr : j) {
            const std::string if_var = jr.at("if").get<std::string>();
            const bool if_value = jr.value("if_value", true);
            const json& then = jr.at("then");
            if (!then.is_object()) throw FormatError("rule 'then' must be an object");
            for (const auto& [var, val] : then.items()) {
                if (!val.is_boolean()) throw FormatError("rule value for '" + var + "' must be a boolean");
                rs.rules.push_back({if_var, if_value, var, val.get<bool>()});
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad rule file: ") + e.what());
    }
    return rs;
}

RuleSet RuleSet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open rule file '" + path + "'");
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

json RuleSet::to_json() const {
    json arr = json::array();
    for (const auto& r : rules) {
        json jr{{"if", r.if_var}, {"then", {{r.then_var, r.then_value}}}};
        if (!r.if_value) jr["if_value"] = false;
        arr.push_back(std::move(jr));
    }
    return arr;
}

std::vector<std::string> RuleSet::variables() const {
    std::set<std::string> vars;
    for (const auto& r : rules) {
        vars.insert(r.if_var);
        vars.insert(r.then_var);
    }
    return {vars.begin(), vars.end()};
}

Assignment close_assignment(const Assignment& a, const RuleSet& rules, ClosureStats* stats) {
    Assignment sigma = a;
    std::map<std::string, std::vector<std::string>> provenance;
    std::unordered_map<std::string, std::vector<std::size_t>> by_premise;
    for (std::size_t i = 0; i < rules.rules.size(); ++i) by_premise[rules.rules[i].if_var].push_back(i);

    std::deque<std::string> queue;
    for (const auto& [k, v] : a.values()) {
        provenance[k] = {"input " + k + "=" + bool_text(v)};
        queue.push_back(k);
    }
    // Each rule fires at most once: when its premise first holds.
    std::vector<bool> fired(rules.rules.size(), false);
    std::size_t firings = 0;
    while (!queue.empty()) {
        const std::string var = queue.front();
        queue.pop_front();
        auto it = by_premise.find(var);
        if (it == by_premise.end()) continue;
        const bool value = sigma.get(var) == Truth::True;
        for (auto idx : it->second) {
            const auto& rule = rules.rules[idx];
            if (fired[idx] || rule.if_value != value) continue;
            fired[idx] = true;
            ++firings;
            const Truth current = sigma.get(rule.then_var);
            if (current == Truth::Unknown) {
                sigma.set(rule.then_var, rule.then_value);
                auto chain = provenance[var];
                chain.push_back(rule.describe());
                provenance[rule.then_var] = std::move(chain);
                queue.push_back(rule.then_var);
            } else if ((current == Truth::True) != rule.then_value) {
                auto chain = provenance[var];
                chain.push_back(rule.describe());
                const auto& prior = provenance[rule.then_var];
                std::string held = rule.then_var + " already " + bool_text(current == Truth::True);
                if (!prior.empty()) held += " via " + prior.back();
                chain.push_back(std::move(held));
                throw ConflictError(rule.then_var, std::move(chain));
            }
        }
    }
    if (stats) stats->firings = firings;
    return sigma;
}

// ---------------------------------------------------------------------------
// Partial evaluation

namespace {

Truth guard_truth(const Arm& arm, const Assignment& sigma) {
    return arm.unconditional() ? Truth::True : sigma.get(arm.guard);
}

// Index of the first true arm, or -1. Throws when two distinct guards are
// true and exclusive implication is on.
long first_true_arm(const ProgramNode& node, const Assignment& sigma, const EvalOptions& options) {
    const auto& arms = node.selector().arms;
    long first = -1;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        if (guard_truth(arms[i], sigma) != Truth::True) continue;
        if (first < 0) {
            first = static_cast<long>(i);
        } else if (options.exclusive_implication && !arms[i].unconditional() && !arms[first].unconditional() &&
                   arms[i].guard != arms[first].guard) {
            throw ConflictError(arms[i].guard,
                                {arms[first].guard + "=true", arms[i].guard + "=true",
                                 "both arms of one exclusive selector"},
                                node.origin);
        }
    }
    return first;
}

class Evaluation {
public:
    Evaluation(const Assignment& sigma, const EvalOptions& options) : sigma_(sigma), options_(options) {}

    NodePtr eval(const NodePtr& node) {
        if (!node) return nullptr;
        if (auto it = memo_.find(node.get()); it != memo_.end()) return it->second;
        NodePtr result = node->is_leaf() ? node : eval_selector(node);
        memo_.emplace(node.get(), result);
        return result;
    }

    const std::set<std::string>& inferred_false() const { return inferred_; }

private:
    NodePtr empty_selector(const NodePtr& node) const {
        if (!options_.keep_empty_selectors) return nullptr;
        const auto& sel = node->selector();
        if (sel.arms.empty()) return node;
        return make_selector(sel.kind, {}, sel.annotations, node->origin);
    }

    NodePtr eval_selector(const NodePtr& node) {
        const auto& sel = node->selector();
        const bool exclusive = sel.kind == BranchKind::exclusive;
        if (exclusive && options_.exclusive_implication) {
            const long chosen = first_true_arm(*node, sigma_, options_);
            if (chosen >= 0) {
                const auto& arm = sel.arms[static_cast<std::size_t>(chosen)];
                for (const auto& other : sel.arms) {
                    if (other.unconditional() || other.guard == arm.guard) continue;
                    if (sigma_.get(other.guard) == Truth::Unknown) inferred_.insert(other.guard);
                }
                NodePtr body = eval(arm.body);
                return body ? body : empty_selector(node);
            }
        }

        std::vector<Arm> arms;
        bool live = false;
        for (const auto& arm : sel.arms) {
            const Truth t = guard_truth(arm, sigma_);
            if (t == Truth::False) continue;
            NodePtr body = eval(arm.body);
            if (exclusive && t == Truth::True) {
                // Without implication the first true arm ends the else-if
                // chain; undecided arms before it stay, it becomes the else.
                if (arms.empty()) return body ? body : empty_selector(node);
                if (body) {
                    arms.push_back({std::string(), body});
                    live = true;
                }
                break;
            }
            if (!body) {
                // A pruned exclusive arm keeps its guard: choosing it later
                // still excludes the siblings.
                if (exclusive) arms.push_back({arm.guard, nullptr});
                continue;
            }
            live = true;
            arms.push_back({t == Truth::True ? std::string() : arm.guard, body});
        }
        if (!live) return empty_selector(node);
        const bool same = arms.size() == sel.arms.size() &&
                          std::equal(arms.begin(), arms.end(), sel.arms.begin(), [](const Arm& x, const Arm& y) {
                              return x.guard == y.guard && x.body == y.body;
                          });
        if (same) return node;
        if (arms.size() == 1 && arms.front().unconditional()) return arms.front().body;
        return make_selector(sel.kind, std::move(arms), sel.annotations, node->origin);
    }

    const Assignment& sigma_;
    const EvalOptions& options_;
    std::unordered_map<const ProgramNode*, NodePtr> memo_;
    std::set<std::string> inferred_;
};

}  // namespace

std::vector<NodePtr> selected_nodes(const Program& program) {
    std::vector<NodePtr> out;
    if (program.empty()) return out;
    std::unordered_set<const ProgramNode*> seen;
    std::function<void(const NodePtr&)> walk = [&](const NodePtr& node) {
        if (!node || !seen.insert(node.get()).second) return;
        out.push_back(node);
        if (node->is_leaf()) return;
        const auto& sel = node->selector();
        // An unconditional exclusive arm is an else branch, not a choice.
        if (sel.kind == BranchKind::exclusive) return;
        for (const auto& arm : sel.arms) {
            if (arm.unconditional()) walk(arm.body);
        }
    };
    walk(program.root);
    return out;
}

Residual partially_evaluate(const Program& program, const Assignment& a, const EvalOptions& options) {
    Residual residual;
    residual.inferred = a;
    if (program.empty()) {
        residual.complete = true;
        return residual;
    }
    Evaluation evaluation(a, options);
    residual.program.root = evaluation.eval(program.root);
    for (const auto& var : evaluation.inferred_false()) residual.inferred.set(var, false);
    residual.complete = residual.program.empty() || residual.program.root->is_leaf();

    std::set<std::string> ambiguous;
    for (const auto& node : selected_nodes(residual.program)) {
        if (!node->is_leaf()) continue;
        for (const auto& [k, v] : node->leaf().bindings) {
            if (ambiguous.count(k)) continue;
            auto [it, inserted] = residual.bindings.emplace(k, v);
            if (!inserted && it->second != v) {
                residual.bindings.erase(it);
                ambiguous.insert(k);
            }
        }
    }
    residual.ambiguous.assign(ambiguous.begin(), ambiguous.end());
    return residual;
}

// ---------------------------------------------------------------------------
// Reference oracle

namespace {

struct Step {
    const ProgramNode* selector;
    std::size_t arm;
};

struct RawPath {
    std::vector<Step> steps;
    NodePtr end;  // leaf, a selector without arms, or null for a pruned arm
};

void all_paths(const NodePtr& node, std::vector<Step>& steps, std::vector<RawPath>& out) {
    if (!node || node->is_leaf() || node->selector().arms.empty()) {
        out.push_back({steps, node});
        return;
    }
    const auto& arms = node->selector().arms;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        steps.push_back({node.get(), i});
        all_paths(arms[i].body, steps, out);
        steps.pop_back();
    }
}

}  // namespace

std::vector<ProgramPath> residual_paths_oracle(const Program& program, const Assignment& a,
                                               const EvalOptions& options) {
    std::vector<ProgramPath> result;
    if (program.empty()) return result;
    std::vector<RawPath> paths;
    std::vector<Step> scratch;
    all_paths(program.root, scratch, paths);

    // A path survives when every step is admissible: its guard is not
    // False, and in an exclusive selector it takes the first true arm if
    // there is one (without implication: no earlier arm is true).
    // Selectors on an admissible prefix are checked for conflicts even when
    // the path dies later.
    for (const auto& p : paths) {
        std::vector<std::string> guards;
        bool keep = true;
        for (const auto& step : p.steps) {
            const auto& sel = step.selector->selector();
            const auto& arm = sel.arms[step.arm];
            if (sel.kind == BranchKind::exclusive && options.exclusive_implication) {
                const long first = first_true_arm(*step.selector, a, options);
                if (first >= 0 && static_cast<std::size_t>(first) != step.arm) {
                    keep = false;
                    break;
                }
            } else if (sel.kind == BranchKind::exclusive) {
                for (std::size_t j = 0; j < step.arm && keep; ++j) {
                    if (guard_truth(sel.arms[j], a) == Truth::True) keep = false;
                }
                if (!keep) break;
            }
            const Truth t = guard_truth(arm, a);
            if (t == Truth::False) {
                keep = false;
                break;
            }
            if (t == Truth::Unknown) guards.push_back(arm.guard);
        }
        if (keep && p.end && p.end->is_leaf()) result.push_back({std::move(guards), p.end});
    }
    std::stable_sort(result.begin(), result.end(), [](const ProgramPath& x, const ProgramPath& y) {
        if (x.guards != y.guards) return x.guards < y.guards;
        return leaf_key(*x.leaf) < leaf_key(*y.leaf);
    });
    return result;
}

}  // namespace sitespec
