#include "sitespec/reconstructor.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "sitespec/error.hpp"

namespace sitespec {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::size_t count_nodes(const TreeNode& n) {
    std::size_t total = 1;
    for (const auto& c : n.children) total += count_nodes(c);
    return total;
}

void collect_ids(const TreeNode& n, std::set<std::string>& ids) {
    ids.insert(n.id);
    for (const auto& c : n.children) collect_ids(c, ids);
}

json node_json(const TreeNode& n) {
    json j{{"id", n.id}, {"guard", n.guard}, {"kind", n.kind}};
    if (!n.origin.empty()) j["origin"] = n.origin;
    if (!n.url.empty()) j["url"] = n.url;
    if (!n.bindings.empty()) j["bindings"] = n.bindings;
    j["annotations"] = n.annotations.empty() ? json::object() : json(n.annotations);
    json children = json::array();
    for (const auto& c : n.children) children.push_back(node_json(c));
    j["children"] = std::move(children);
    return j;
}

}  // namespace

std::size_t PersonalizedTree::size() const { return root ? count_nodes(*root) : 0; }

std::size_t PersonalizedTree::distinct_ids() const {
    if (!root) return 0;
    std::set<std::string> ids;
    collect_ids(*root, ids);
    return ids.size();
}

json PersonalizedTree::to_json() const {
    if (!root) return {{"guard", "root"}, {"empty", true}, {"note", "no results"}, {"children", json::array()}};
    return node_json(*root);
}

PersonalizedTree render_tree(const Program& program) {
    PersonalizedTree tree;
    if (program.empty()) return tree;
    std::unordered_map<const ProgramNode*, std::string> ids;
    std::function<TreeNode(const NodePtr&, const std::string&)> build = [&](const NodePtr& node,
                                                                           const std::string& guard) {
        TreeNode t;
        auto [it, inserted] = ids.emplace(node.get(), "t" + std::to_string(ids.size()));
        t.id = it->second;
        t.guard = guard;
        t.origin = node->origin;
        if (node->is_leaf()) {
            const auto& leaf = node->leaf();
            t.kind = "leaf";
            t.url = leaf.url;
            t.bindings = leaf.bindings;
            t.annotations = leaf.annotations;
            return t;
        }
        const auto& sel = node->selector();
        t.kind = to_string(sel.kind);
        t.annotations = sel.annotations;
        const bool exclusive = sel.kind == BranchKind::exclusive;
        for (const auto& arm : sel.arms) {
            // Pruned arms lead to no page.
            if (!arm.body) continue;
            const char* fixed = exclusive ? "else" : "selected";
            t.children.push_back(build(arm.body, arm.unconditional() ? fixed : arm.guard));
        }
        return t;
    };
    tree.root = build(program.root, "root");
    return tree;
}

PersonalizedTree render_tree(const Residual& residual) { return render_tree(residual.program); }

PersonalizedTree focus(const PersonalizedTree& tree) {
    if (!tree.root) return tree;
    std::function<std::optional<TreeNode>(const TreeNode&)> keep = [&](const TreeNode& n) -> std::optional<TreeNode> {
        if (n.guard == "selected") return n;
        TreeNode copy = n;
        copy.children.clear();
        for (const auto& c : n.children) {
            if (auto k = keep(c)) copy.children.push_back(std::move(*k));
        }
        if (copy.children.empty()) return std::nullopt;
        return copy;
    };
    PersonalizedTree out;
    out.root = keep(*tree.root);
    if (!out.root) return tree;
    return out;
}

std::string render_report(const CascadeResult& result) {
    std::ostringstream os;
    for (const auto& [field, value] : result.report_fields) {
        os << field << ": " << (value ? *value : std::string("undetermined")) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Static pages

namespace {

std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string page_title(const TreeNode& n) {
    if (n.guard == "root") return "root";
    return n.guard;
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << bytes;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

void definition_list(std::ostringstream& os, const char* heading, const TextMap& m) {
    if (m.empty()) return;
    os << "<h2>" << heading << "</h2>\n<dl>\n";
    for (const auto& [k, v] : m) os << "<dt>" << escape_html(k) << "</dt><dd>" << escape_html(v) << "</dd>\n";
    os << "</dl>\n";
}

}  // namespace

std::vector<std::string> emit_pages(const PersonalizedTree& tree, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("cannot create '" + out_dir + "': " + ec.message());

    std::vector<std::string> files;
    if (!tree.root) {
        write_file(fs::path(out_dir) / "index.html",
                   "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>no results</title></head>\n"
                   "<body>\n<h1>no results</h1>\n</body></html>\n");
        files.push_back("index.html");
        return files;
    }

    // Preorder numbering first so parents can link to children.
    std::vector<const TreeNode*> order;
    std::function<void(const TreeNode&)> number = [&](const TreeNode& n) {
        order.push_back(&n);
        for (const auto& c : n.children) number(c);
    };
    number(*tree.root);
    std::unordered_map<const TreeNode*, std::string> name;
    for (std::size_t i = 0; i < order.size(); ++i) {
        name[order[i]] = i == 0 ? "index.html" : "page-" + std::to_string(i) + ".html";
    }
    std::unordered_map<const TreeNode*, const TreeNode*> parent;
    for (const auto* n : order) {
        for (const auto& c : n->children) parent[&c] = n;
    }

    for (const auto* n : order) {
        std::ostringstream os;
        const std::string title = escape_html(page_title(*n));
        os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << title << "</title></head>\n<body>\n";
        os << "<h1>" << title << "</h1>\n";
        if (auto it = parent.find(n); it != parent.end()) {
            os << "<p><a href=\"" << name[it->second] << "\">up</a></p>\n";
        }
        if (!n->url.empty()) {
            os << "<p><a class=\"target\" href=\"" << escape_html(n->url) << "\">" << escape_html(n->url)
               << "</a></p>\n";
        }
        definition_list(os, "Bindings", n->bindings);
        definition_list(os, "Annotations", n->annotations);
        if (!n->children.empty()) {
            os << "<ul>\n";
            for (const auto& c : n->children) {
                os << "<li><a href=\"" << name[&c] << "\">" << escape_html(page_title(c)) << "</a></li>\n";
            }
            os << "</ul>\n";
        }
        os << "</body></html>\n";
        write_file(fs::path(out_dir) / name[n], os.str());
        files.push_back(name[n]);
    }
    return files;
}

}  // namespace sitespec
