#pragma once

// Branching-program IR compiled from a site graph. A program is a rooted DAG
// of immutable nodes; sub-programs may be shared between arms.

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sitespec/graph.hpp"

namespace sitespec {

struct ProgramNode;
using NodePtr = std::shared_ptr<const ProgramNode>;

// An arm with an empty guard is unconditional: its guard was satisfied during
// partial evaluation and eliminated, but the body stays as a child of an
// inclusive selector, or as the trailing `else` of an exclusive one.
// A null body marks an exclusive arm whose sub-program was pruned away; the
// guard stays because choosing it still rules out the siblings.
struct Arm {
    std::string guard;
    NodePtr body;

    bool unconditional() const { return guard.empty(); }
};

struct Selector {
    BranchKind kind = BranchKind::exclusive;
    std::vector<Arm> arms;
    TextMap annotations;
};

struct Leaf {
    TextMap bindings;
    std::string url;
    TextMap annotations;
};

struct ProgramNode {
    std::variant<Selector, Leaf> data;
    // Graph node this was compiled from; carried through evaluation.
    std::string origin;

    bool is_leaf() const { return std::holds_alternative<Leaf>(data); }
    const Selector& selector() const { return std::get<Selector>(data); }
    const Leaf& leaf() const { return std::get<Leaf>(data); }
    const TextMap& annotations() const;
};

NodePtr make_selector(BranchKind kind, std::vector<Arm> arms, TextMap annotations = {},
                      std::string origin = {});
NodePtr make_leaf(TextMap bindings, std::string url, TextMap annotations = {},
                  std::string origin = {});

// A null root is the empty program (every branch pruned).
struct Program {
    NodePtr root;

    bool empty() const { return root == nullptr; }
};

struct CrossReference {
    std::string from;
    std::string to;
    std::string label;

    friend bool operator==(const CrossReference&, const CrossReference&) = default;
};

struct BuildResult {
    Program program;
    std::vector<CrossReference> cross_references;
};

BuildResult build_program(const SiteGraph& graph);

struct ProgramPath {
    std::vector<std::string> guards;
    NodePtr leaf;
};

// Stable identity of a leaf across evaluation and serialization.
std::string leaf_key(const ProgramNode& leaf);

// Root-to-leaf guard sequences. Unconditional arms contribute no guard.
// Sorted by (guards, leaf_key).
std::vector<ProgramPath> enumerate_paths(const Program& program);

using PathKey = std::pair<std::vector<std::string>, std::string>;
std::vector<PathKey> path_keys(const std::vector<ProgramPath>& paths);

// Distinct nodes (by identity) reachable from the root.
std::size_t node_count(const Program& program);
// Nodes counted once per occurrence in the unfolded tree.
std::size_t unfolded_size(const Program& program);

bool structurally_equal(const Program& a, const Program& b);
bool structurally_equal(const NodePtr& a, const NodePtr& b);

// All guard variables, sorted and unique.
std::vector<std::string> guard_variables(const Program& program);
// All variables bound by leaves, sorted and unique.
std::vector<std::string> binding_variables(const Program& program);

// Exclusive selectors never repeat a guard.
bool exclusive_guards_distinct(const Program& program);

nlohmann::json program_to_json(const Program& program,
                               const std::vector<CrossReference>& cross_references = {});
std::string serialize(const Program& program, const std::vector<CrossReference>& cross_references = {});

struct Deserialized {
    Program program;
    std::vector<CrossReference> cross_references;
};

Deserialized program_from_json(const nlohmann::json& j);
Deserialized deserialize(const std::string& bytes);
Deserialized load_program(const std::string& path);
void save_program(const std::string& path, const Program& program,
                  const std::vector<CrossReference>& cross_references = {});

// Nested if / else-if listing.
std::string render_pseudo(const Program& program);

}  // namespace sitespec
