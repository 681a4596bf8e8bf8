#include "sitespec/program.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "sitespec/error.hpp"

namespace sitespec {

using nlohmann::json;

const TextMap& ProgramNode::annotations() const {
    return is_leaf() ? leaf().annotations : selector().annotations;
}

NodePtr make_selector(BranchKind kind, std::vector<Arm> arms, TextMap annotations, std::string origin) {
    return std::make_shared<const ProgramNode>(
        ProgramNode{Selector{kind, std::move(arms), std::move(annotations)}, std::move(origin)});
}

NodePtr make_leaf(TextMap bindings, std::string url, TextMap annotations, std::string origin) {
    return std::make_shared<const ProgramNode>(
        ProgramNode{Leaf{std::move(bindings), std::move(url), std::move(annotations)}, std::move(origin)});
}

// ---------------------------------------------------------------------------
// Compilation from a site graph

BuildResult build_program(const SiteGraph& graph) {
    BuildResult result;
    if (!graph.contains(graph.root)) throw Error("graph root '" + graph.root + "' is missing");

    auto adj = adjacency(graph);
    enum class Mark { active, done };
    std::map<std::string, Mark> marks;
    std::map<std::string, NodePtr> built;

    std::function<NodePtr(const std::string&)> visit = [&](const std::string& id) -> NodePtr {
        marks[id] = Mark::active;
        const auto& gn = graph.node(id);
        std::vector<Arm> arms;
        std::set<std::string> guards;
        for (auto idx : adj.out[id]) {  // edges are sorted by (label, target)
            const auto& e = graph.edges[idx];
            if (e.label.empty()) throw Error("edge from '" + id + "' has an empty label");
            if (!graph.contains(e.target)) throw Error("edge from '" + id + "' to missing node '" + e.target + "'");
            auto m = marks.find(e.target);
            if (m != marks.end() && m->second == Mark::active) {
                result.cross_references.push_back({id, e.target, e.label});
                continue;
            }
            if (gn.branch_kind == BranchKind::exclusive && !guards.insert(e.label).second) {
                throw Error("duplicate label '" + e.label + "' under exclusive node '" + id + "'");
            }
            NodePtr body = (m != marks.end()) ? built.at(e.target) : visit(e.target);
            arms.push_back({e.label, std::move(body)});
        }
        NodePtr node = arms.empty()
                           ? make_leaf(gn.leaf_bindings, gn.url, gn.annotations, id)
                           : make_selector(gn.branch_kind, std::move(arms), gn.annotations, id);
        marks[id] = Mark::done;
        built[id] = node;
        return node;
    };
    result.program.root = visit(graph.root);
    return result;
}

// ---------------------------------------------------------------------------
// Queries

std::string leaf_key(const ProgramNode& leaf) {
    return leaf.origin + '\x1f' + (leaf.is_leaf() ? leaf.leaf().url : std::string());
}

std::vector<ProgramPath> enumerate_paths(const Program& program) {
    std::vector<ProgramPath> paths;
    if (program.empty()) return paths;
    std::vector<std::string> guards;
    std::function<void(const NodePtr&)> walk = [&](const NodePtr& node) {
        if (!node) return;
        if (node->is_leaf()) {
            paths.push_back({guards, node});
            return;
        }
        for (const auto& arm : node->selector().arms) {
            if (!arm.unconditional()) guards.push_back(arm.guard);
            walk(arm.body);
            if (!arm.unconditional()) guards.pop_back();
        }
    };
    walk(program.root);
    std::stable_sort(paths.begin(), paths.end(), [](const ProgramPath& a, const ProgramPath& b) {
        if (a.guards != b.guards) return a.guards < b.guards;
        return leaf_key(*a.leaf) < leaf_key(*b.leaf);
    });
    return paths;
}

std::vector<PathKey> path_keys(const std::vector<ProgramPath>& paths) {
    std::vector<PathKey> keys;
    keys.reserve(paths.size());
    for (const auto& p : paths) keys.emplace_back(p.guards, leaf_key(*p.leaf));
    std::sort(keys.begin(), keys.end());
    return keys;
}

namespace {

template <typename F>
void for_each_node(const Program& program, F&& f) {
    if (program.empty()) return;
    std::unordered_set<const ProgramNode*> seen;
    std::vector<const ProgramNode*> stack{program.root.get()};
    while (!stack.empty()) {
        const ProgramNode* n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        f(*n);
        if (!n->is_leaf()) {
            for (const auto& arm : n->selector().arms) {
                if (arm.body) stack.push_back(arm.body.get());
            }
        }
    }
}

}  // namespace

std::size_t node_count(const Program& program) {
    std::size_t count = 0;
    for_each_node(program, [&](const ProgramNode&) { ++count; });
    return count;
}

std::size_t unfolded_size(const Program& program) {
    if (program.empty()) return 0;
    std::unordered_map<const ProgramNode*, std::size_t> memo;
    std::function<std::size_t(const ProgramNode*)> size = [&](const ProgramNode* n) -> std::size_t {
        if (!n) return 0;
        if (auto it = memo.find(n); it != memo.end()) return it->second;
        std::size_t s = 1;
        if (!n->is_leaf()) {
            for (const auto& arm : n->selector().arms) s += size(arm.body.get());
        }
        memo[n] = s;
        return s;
    };
    return size(program.root.get());
}

bool structurally_equal(const NodePtr& a, const NodePtr& b) {
    std::set<std::pair<const ProgramNode*, const ProgramNode*>> proven;
    std::function<bool(const ProgramNode*, const ProgramNode*)> eq = [&](const ProgramNode* x,
                                                                         const ProgramNode* y) {
        if (x == y) return true;
        if (!x || !y) return false;
        if (proven.count({x, y})) return true;
        if (x->origin != y->origin || x->is_leaf() != y->is_leaf()) return false;
        if (x->is_leaf()) {
            const auto &lx = x->leaf(), &ly = y->leaf();
            if (lx.bindings != ly.bindings || lx.url != ly.url || lx.annotations != ly.annotations) return false;
        } else {
            const auto &sx = x->selector(), &sy = y->selector();
            if (sx.kind != sy.kind || sx.annotations != sy.annotations || sx.arms.size() != sy.arms.size()) {
                return false;
            }
            for (std::size_t i = 0; i < sx.arms.size(); ++i) {
                if (sx.arms[i].guard != sy.arms[i].guard) return false;
                if (!eq(sx.arms[i].body.get(), sy.arms[i].body.get())) return false;
            }
        }
        proven.insert({x, y});
        return true;
    };
    return eq(a.get(), b.get());
}

bool structurally_equal(const Program& a, const Program& b) {
    return structurally_equal(a.root, b.root);
}

std::vector<std::string> guard_variables(const Program& program) {
    std::set<std::string> vars;
    for_each_node(program, [&](const ProgramNode& n) {
        if (n.is_leaf()) return;
        for (const auto& arm : n.selector().arms) {
            if (!arm.unconditional()) vars.insert(arm.guard);
        }
    });
    return {vars.begin(), vars.end()};
}

std::vector<std::string> binding_variables(const Program& program) {
    std::set<std::string> vars;
    for_each_node(program, [&](const ProgramNode& n) {
        if (!n.is_leaf()) return;
        for (const auto& [k, v] : n.leaf().bindings) vars.insert(k);
    });
    return {vars.begin(), vars.end()};
}

bool exclusive_guards_distinct(const Program& program) {
    bool ok = true;
    for_each_node(program, [&](const ProgramNode& n) {
        if (n.is_leaf() || n.selector().kind != BranchKind::exclusive) return;
        std::set<std::string> seen;
        for (const auto& arm : n.selector().arms) {
            if (!seen.insert(arm.guard).second) ok = false;
        }
    });
    return ok;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr const char* kFormat = "sitespec-program";

}  // namespace

json program_to_json(const Program& program, const std::vector<CrossReference>& cross_references) {
    json nodes = json::object();
    std::unordered_map<const ProgramNode*, std::string> ids;
    std::function<std::string(const NodePtr&)> emit = [&](const NodePtr& node) -> std::string {
        if (auto it = ids.find(node.get()); it != ids.end()) return it->second;
        std::string id = "n" + std::to_string(ids.size());
        ids.emplace(node.get(), id);
        json j;
        if (node->is_leaf()) {
            const auto& leaf = node->leaf();
            j = json{{"kind", "leaf"}, {"url", leaf.url}, {"bindings", leaf.bindings}, {"annotations", leaf.annotations}};
        } else {
            const auto& sel = node->selector();
            json arms = json::array();
            for (const auto& arm : sel.arms) {
                json ja{{"body", arm.body ? json(emit(arm.body)) : json(nullptr)}};
                if (!arm.unconditional()) ja["guard"] = arm.guard;
                arms.push_back(std::move(ja));
            }
            j = json{{"kind", to_string(sel.kind)}, {"arms", arms}, {"annotations", sel.annotations}};
        }
        if (!node->origin.empty()) j["origin"] = node->origin;
        nodes[id] = std::move(j);
        return id;
    };
    json root = program.empty() ? json(nullptr) : json(emit(program.root));
    json refs = json::array();
    for (const auto& r : cross_references) refs.push_back({{"from", r.from}, {"to", r.to}, {"label", r.label}});
    return json{{"format", kFormat}, {"version", 1}, {"root", root}, {"nodes", nodes}, {"cross_references", refs}};
}

std::string serialize(const Program& program, const std::vector<CrossReference>& cross_references) {
    return program_to_json(program, cross_references).dump();
}

Deserialized program_from_json(const json& j) {
    Deserialized out;
    if (!j.is_object() || j.value("format", std::string()) != kFormat) {
        throw FormatError("not a program file (missing format tag)");
    }
    try {
        const json& nodes = j.at("nodes");
        if (!nodes.is_object()) throw FormatError("program nodes must be an object");
        std::map<std::string, NodePtr> built;
        std::set<std::string> visiting;
        std::function<NodePtr(const std::string&)> load = [&](const std::string& id) -> NodePtr {
            if (auto it = built.find(id); it != built.end()) return it->second;
            if (!visiting.insert(id).second) throw FormatError("cyclic reference at node '" + id + "'");
            if (!nodes.contains(id)) throw FormatError("reference to unknown node '" + id + "'");
            const json& jn = nodes.at(id);
            const std::string kind = jn.at("kind").get<std::string>();
            std::string origin = jn.value("origin", std::string());
            NodePtr node;
            if (kind == "leaf") {
                node = make_leaf(jn.value("bindings", TextMap{}), jn.value("url", std::string()),
                                 jn.value("annotations", TextMap{}), std::move(origin));
            } else if (kind == "exclusive" || kind == "inclusive") {
                std::vector<Arm> arms;
                for (const auto& ja : jn.at("arms")) {
                    // A null body is an arm whose guard still matters but leads nowhere.
                    const json& jb = ja.at("body");
                    arms.push_back({ja.value("guard", std::string()), jb.is_null() ? nullptr : load(jb.get<std::string>())});
                }
                node = make_selector(branch_kind_from_string(kind), std::move(arms),
                                     jn.value("annotations", TextMap{}), std::move(origin));
            } else {
                throw FormatError("unknown node kind '" + kind + "' at node '" + id + "'");
            }
            visiting.erase(id);
            built.emplace(id, node);
            return node;
        };
        if (!j.at("root").is_null()) out.program.root = load(j.at("root").get<std::string>());
        if (j.contains("cross_references")) {
            for (const auto& r : j.at("cross_references")) {
                out.cross_references.push_back({r.at("from").get<std::string>(), r.at("to").get<std::string>(),
                                                r.at("label").get<std::string>()});
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad program file: ") + e.what());
    }
    return out;
}

Deserialized deserialize(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("program parse error: ") + e.what());
    }
    return program_from_json(j);
}

Deserialized load_program(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open program file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void save_program(const std::string& path, const Program& program,
                  const std::vector<CrossReference>& cross_references) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write program file '" + path + "'");
    out << program_to_json(program, cross_references).dump(2) << '\n';
}

// ---------------------------------------------------------------------------

std::string render_pseudo(const Program& program) {
    if (program.empty()) return "/* empty */\n";
    std::ostringstream os;
    std::function<void(const NodePtr&, int)> emit = [&](const NodePtr& node, int depth) {
        const std::string pad(static_cast<std::size_t>(depth) * 3, ' ');
        if (!node) {
            os << pad << "/* nothing */\n";
            return;
        }
        if (node->is_leaf()) {
            const auto& leaf = node->leaf();
            if (leaf.bindings.empty()) {
                os << pad << "/* " << (leaf.url.empty() ? node->origin : leaf.url) << " */\n";
            }
            for (const auto& [k, v] : leaf.bindings) os << pad << k << " = \"" << v << "\"\n";
            return;
        }
        const auto& sel = node->selector();
        if (sel.arms.empty()) os << pad << "/* empty */\n";
        bool first = true;
        for (const auto& arm : sel.arms) {
            const bool chained = sel.kind == BranchKind::exclusive && !first;
            if (arm.unconditional()) {
                if (chained) os << pad << "else\n";
                emit(arm.body, chained ? depth + 1 : depth);
                first = false;
                continue;
            }
            os << pad << (chained ? "else if (" : "if (") << arm.guard << ")\n";
            emit(arm.body, depth + 1);
            first = false;
        }
    };
    emit(program.root, 0);
    return os.str();
}

}  // namespace sitespec
