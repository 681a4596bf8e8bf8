#pragma once

// User-facing artifacts built from residuals: a JSON tree, a text report and
// a set of static pages.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sitespec/evaluator.hpp"
#include "sitespec/integrator.hpp"

namespace sitespec {

struct TreeNode {
    // Residual node identity; shared sub-programs appear once per occurrence
    // but keep one id.
    std::string id;
    // "root", the arm guard, "selected" for an unconditional inclusive arm or
    // "else" for the trailing unconditional arm of an exclusive selector.
    // Arms pruned to nothing are left out.
    std::string guard;
    // "exclusive", "inclusive" or "leaf".
    std::string kind;
    std::string origin;
    std::string url;
    TextMap bindings;
    TextMap annotations;
    std::vector<TreeNode> children;
};

struct PersonalizedTree {
    std::optional<TreeNode> root;

    bool empty() const { return !root.has_value(); }
    // Tree nodes, counting shared sub-programs once per occurrence.
    std::size_t size() const;
    std::size_t distinct_ids() const;
    nlohmann::json to_json() const;
};

PersonalizedTree render_tree(const Program& program);
PersonalizedTree render_tree(const Residual& residual);

// Subtrees under unconditional arms, with their ancestors. A tree with no
// such subtree is returned whole.
PersonalizedTree focus(const PersonalizedTree& tree);

// One "Field: value" line per report field; missing values read
// "undetermined".
std::string render_report(const CascadeResult& result);

// Writes index.html for the root and page-N.html for every other node in
// preorder. Returns the file names written, index first.
std::vector<std::string> emit_pages(const PersonalizedTree& tree, const std::string& out_dir);

}  // namespace sitespec
