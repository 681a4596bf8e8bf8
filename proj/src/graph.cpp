#include "sitespec/graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <istream>
#include <sstream>

#include "sitespec/error.hpp"

namespace sitespec {

using nlohmann::json;

std::string_view to_string(BranchKind kind) {
    return kind == BranchKind::exclusive ? "exclusive" : "inclusive";
}

BranchKind branch_kind_from_string(std::string_view text) {
    if (text == "exclusive") return BranchKind::exclusive;
    if (text == "inclusive") return BranchKind::inclusive;
    throw FormatError("unknown branch kind '" + std::string(text) + "'");
}

const GraphNode& SiteGraph::node(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw Error("no node '" + id + "' in graph");
    return it->second;
}

void SiteGraph::canonicalize() {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const LabeledEdge& a, const LabeledEdge& b) {
                                return a.source == b.source && a.label == b.label &&
                                       a.target == b.target;
                            }),
                edges.end());
}

Adjacency adjacency(const SiteGraph& graph) {
    Adjacency adj;
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        adj.out[graph.edges[i].source].push_back(i);
        adj.in[graph.edges[i].target].push_back(i);
    }
    return adj;
}

// ---------------------------------------------------------------------------
// Normalization

namespace {

bool is_token_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u);
}

bool is_alpha_word(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c));
    });
}

bool is_single_token(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), is_token_char);
}

std::string ascii_lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           std::string_view(s).substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::string> split_tokens(std::string_view raw) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : raw) {
        if (is_token_char(c)) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// One rewriting step. The suffix table is deliberately small:
//   sses -> ss, ies -> y, ers -> ing, plural s -> (dropped).
std::string stem_step(const std::string& token, const NormalizationConfig& config) {
    std::string t = config.case_fold ? ascii_lower(token) : token;
    if (auto it = config.stem_overrides.find(t); it != config.stem_overrides.end()) {
        if (is_single_token(it->second)) {
            return config.case_fold ? ascii_lower(it->second) : it->second;
        }
    }
    if (!is_alpha_word(t)) return t;
    if (ends_with(t, "sses") && t.size() > 4) return t.substr(0, t.size() - 2);
    if (ends_with(t, "ies") && t.size() > 4) return t.substr(0, t.size() - 3) + "y";
    if (ends_with(t, "ers") && t.size() >= 6) return t.substr(0, t.size() - 3) + "ing";
    if (ends_with(t, "s") && t.size() >= 4) {
        char prev = t[t.size() - 2];
        if (prev != 's' && prev != 'u' && prev != 'i') return t.substr(0, t.size() - 1);
    }
    return t;
}

}  // namespace

std::string stem_token(const std::string& token, const NormalizationConfig& config) {
    // Iterate the step to a fixed point. Override tables may contain cycles;
    // those resolve to the smallest member so the result is still stable.
    std::vector<std::string> seen;
    std::string cur = token;
    while (true) {
        std::string next = stem_step(cur, config);
        if (next == cur) return cur;
        seen.push_back(cur);
        if (auto it = std::find(seen.begin(), seen.end(), next); it != seen.end()) {
            return *std::min_element(it, seen.end());
        }
        cur = std::move(next);
        if (seen.size() > 64) return cur;
    }
}

std::string normalize_label(std::string_view raw, const NormalizationConfig& config) {
    std::string out;
    for (auto& token : split_tokens(raw)) {
        std::string t = config.case_fold ? ascii_lower(token) : token;
        if (config.stopwords.count(t)) continue;
        if (config.stemming) t = stem_token(t, config);
        if (t.empty() || config.stopwords.count(t)) continue;
        if (!out.empty()) out.push_back('_');
        out += t;
    }
    return out;
}

std::vector<std::string> label_tokens(std::string_view normalized) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : normalized) {
        if (c == '_') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

NormalizationConfig NormalizationConfig::from_json(const json& j) {
    if (!j.is_object()) throw FormatError("normalization config must be a JSON object");
    NormalizationConfig cfg;
    try {
        if (j.contains("stopwords")) {
            for (const auto& w : j.at("stopwords")) cfg.stopwords.insert(w.get<std::string>());
        }
        cfg.stemming = j.value("stemming", false);
        cfg.case_fold = j.value("case_fold", true);
        if (j.contains("continuations")) {
            cfg.label_continuations = j.at("continuations").get<TextMap>();
        }
        if (j.contains("stem_overrides")) {
            cfg.stem_overrides = j.at("stem_overrides").get<TextMap>();
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad normalization config: ") + e.what());
    }
    for (const auto& [from, to] : cfg.stem_overrides) {
        if (!is_single_token(to)) {
            throw FormatError("stem override for '" + from + "' must be a single token, got '" +
                              to + "'");
        }
    }
    return cfg;
}

NormalizationConfig NormalizationConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open normalization config '" + path + "'");
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

json NormalizationConfig::to_json() const {
    return json{{"stopwords", stopwords},
                {"stemming", stemming},
                {"case_fold", case_fold},
                {"continuations", label_continuations},
                {"stem_overrides", stem_overrides}};
}

// ---------------------------------------------------------------------------
// Crawl records

CrawlRecord CrawlRecord::from_json(const json& j) {
    if (!j.is_object()) throw FormatError("crawl record must be a JSON object");
    CrawlRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.url = j.at("url").get<std::string>();
        r.root = j.value("root", false);
        if (j.contains("kind")) r.kind = branch_kind_from_string(j.at("kind").get<std::string>());
        if (j.contains("annotations")) r.annotations = j.at("annotations").get<TextMap>();
        if (j.contains("leaf_bindings")) r.leaf_bindings = j.at("leaf_bindings").get<TextMap>();
        if (j.contains("out")) {
            for (const auto& o : j.at("out")) {
                r.out.push_back({o.at("label").get<std::string>(), o.at("target").get<std::string>()});
            }
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad crawl record: ") + e.what());
    }
    return r;
}

json CrawlRecord::to_json() const {
    json j{{"id", id}, {"url", url}, {"kind", to_string(kind)}};
    if (root) j["root"] = true;
    if (!annotations.empty()) j["annotations"] = annotations;
    if (!leaf_bindings.empty()) j["leaf_bindings"] = leaf_bindings;
    json out = json::array();
    for (const auto& o : this->out) out.push_back({{"label", o.label}, {"target", o.target}});
    j["out"] = out;
    return j;
}

std::vector<CrawlRecord> read_crawl_dump(std::istream& in) {
    std::vector<CrawlRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(),
                        [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
            continue;
        }
        try {
            records.push_back(CrawlRecord::from_json(json::parse(line)));
        } catch (const json::parse_error& e) {
            throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

std::vector<CrawlRecord> load_crawl_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open crawl dump '" + path + "'");
    try {
        return read_crawl_dump(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Strips a trailing "..." or U+2026. Returns false when no marker is present.
bool strip_continuation(const std::string& label, std::string& stripped) {
    static const std::string ellipsis = "\xE2\x80\xA6";
    if (ends_with(label, kContinuationMarker)) {
        stripped = trim(std::string_view(label).substr(0, label.size() - kContinuationMarker.size()));
        return true;
    }
    if (ends_with(label, ellipsis)) {
        stripped = trim(std::string_view(label).substr(0, label.size() - ellipsis.size()));
        return true;
    }
    return false;
}

}  // namespace

SiteGraph ingest_crawl(const std::vector<CrawlRecord>& records, const NormalizationConfig& config) {
    SiteGraph graph;
    std::vector<std::string> roots;
    for (const auto& r : records) {
        if (graph.nodes.count(r.id)) throw IngestError("duplicate node id '" + r.id + "'");
        GraphNode n{r.id, trim(r.url), r.annotations, r.kind, r.leaf_bindings};
        graph.nodes.emplace(r.id, std::move(n));
        if (r.root) roots.push_back(r.id);
    }
    if (roots.empty()) throw IngestError("no root");
    if (roots.size() > 1) {
        std::sort(roots.begin(), roots.end());
        std::string names;
        for (const auto& id : roots) names += (names.empty() ? "" : ", ") + id;
        throw IngestError("multiple roots: " + names);
    }
    graph.root = roots.front();

    for (const auto& r : records) {
        for (const auto& link : r.out) {
            if (!graph.nodes.count(link.target)) {
                throw IngestError("edge '" + link.label + "' from '" + r.id + "' to unknown node '" +
                                  link.target + "'");
            }
            LabeledEdge e;
            e.source = r.id;
            e.target = link.target;
            e.raw_label = link.label;
            std::string text = trim(link.label);
            std::string stripped;
            if (strip_continuation(text, stripped)) {
                auto& table = config.label_continuations;
                if (auto it = table.find(text); it != table.end()) {
                    text = it->second;
                } else if (auto it2 = table.find(stripped); it2 != table.end()) {
                    text = it2->second;
                } else {
                    text = stripped;
                    e.unresolved_continuation = true;
                }
            }
            e.label = normalize_label(text, config);
            graph.edges.push_back(std::move(e));
        }
    }
    graph.canonicalize();
    return graph;
}

SiteGraph ingest_crawl(std::istream& in, const NormalizationConfig& config) {
    return ingest_crawl(read_crawl_dump(in), config);
}

// ---------------------------------------------------------------------------
// Validation

std::string_view to_string(IssueKind kind) {
    switch (kind) {
        case IssueKind::missing_root: return "missing_root";
        case IssueKind::unreachable: return "unreachable";
        case IssueKind::duplicate_label: return "duplicate_label";
        case IssueKind::empty_label: return "empty_label";
        case IssueKind::dangling_edge: return "dangling_edge";
        case IssueKind::empty_url: return "empty_url";
        case IssueKind::leaf_with_edges: return "leaf_with_edges";
        case IssueKind::unresolved_continuation: return "unresolved_continuation";
    }
    return "unknown";
}

bool ValidationReport::ok() const {
    return std::all_of(issues.begin(), issues.end(), [](const auto& i) { return i.warning; });
}

std::size_t ValidationReport::count(IssueKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        issues.begin(), issues.end(), [kind](const auto& i) { return i.kind == kind; }));
}

json ValidationReport::to_json() const {
    json arr = json::array();
    for (const auto& i : issues) {
        arr.push_back({{"kind", to_string(i.kind)},
                       {"severity", i.warning ? "warning" : "error"},
                       {"node", i.node},
                       {"detail", i.detail}});
    }
    return json{{"ok", ok()}, {"issues", arr}};
}

ValidationReport validate(const SiteGraph& graph) {
    ValidationReport report;
    auto add = [&](IssueKind kind, std::string node, std::string detail, bool warning = false) {
        report.issues.push_back({kind, warning, std::move(node), std::move(detail)});
    };

    if (!graph.contains(graph.root)) add(IssueKind::missing_root, graph.root, "root not in nodes");

    for (const auto& [id, n] : graph.nodes) {
        if (trim(n.url).empty()) add(IssueKind::empty_url, id, "node has empty url");
    }

    std::map<std::pair<std::string, std::string>, std::size_t> label_counts;
    std::map<std::string, std::size_t> out_degree;
    for (const auto& e : graph.edges) {
        if (!graph.contains(e.source) || !graph.contains(e.target)) {
            add(IssueKind::dangling_edge, e.source,
                "edge '" + e.raw_label + "' " + e.source + " -> " + e.target +
                    " references a missing node");
            continue;
        }
        if (e.label.empty()) {
            add(IssueKind::empty_label, e.source,
                "label '" + e.raw_label + "' normalizes to empty text");
        }
        if (e.unresolved_continuation) {
            add(IssueKind::unresolved_continuation, e.source,
                "continued label '" + e.raw_label + "' has no continuation entry", true);
        }
        ++label_counts[{e.source, e.label}];
        ++out_degree[e.source];
    }
    for (const auto& [key, count] : label_counts) {
        if (count < 2) continue;
        if (graph.node(key.first).branch_kind != BranchKind::exclusive) continue;
        add(IssueKind::duplicate_label, key.first,
            "label '" + key.second + "' appears " + std::to_string(count) +
                " times under an exclusive node");
    }
    for (const auto& [id, n] : graph.nodes) {
        if (!n.leaf_bindings.empty() && out_degree[id] > 0) {
            add(IssueKind::leaf_with_edges, id, "node with leaf bindings has outgoing edges");
        }
    }

    if (graph.contains(graph.root)) {
        auto adj = adjacency(graph);
        std::set<std::string> seen{graph.root};
        std::deque<std::string> queue{graph.root};
        while (!queue.empty()) {
            auto id = queue.front();
            queue.pop_front();
            for (auto idx : adj.out[id]) {
                const auto& t = graph.edges[idx].target;
                if (graph.contains(t) && seen.insert(t).second) queue.push_back(t);
            }
        }
        for (const auto& [id, n] : graph.nodes) {
            if (!seen.count(id)) add(IssueKind::unreachable, id, "not reachable from root");
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Graph files

json graph_to_json(const SiteGraph& graph) {
    json nodes = json::array();
    for (const auto& [id, n] : graph.nodes) {
        nodes.push_back({{"id", n.id},
                         {"url", n.url},
                         {"kind", to_string(n.branch_kind)},
                         {"annotations", n.annotations},
                         {"leaf_bindings", n.leaf_bindings}});
    }
    json edges = json::array();
    for (const auto& e : graph.edges) {
        json je{{"source", e.source}, {"target", e.target}, {"raw_label", e.raw_label}, {"label", e.label}};
        if (e.unresolved_continuation) je["unresolved_continuation"] = true;
        edges.push_back(std::move(je));
    }
    return json{{"root", graph.root}, {"nodes", nodes}, {"edges", edges}};
}

SiteGraph graph_from_json(const json& j) {
    SiteGraph g;
    try {
        g.root = j.at("root").get<std::string>();
        for (const auto& jn : j.at("nodes")) {
            GraphNode n;
            n.id = jn.at("id").get<std::string>();
            n.url = jn.at("url").get<std::string>();
            n.branch_kind = branch_kind_from_string(jn.value("kind", std::string("exclusive")));
            if (jn.contains("annotations")) n.annotations = jn.at("annotations").get<TextMap>();
            if (jn.contains("leaf_bindings")) n.leaf_bindings = jn.at("leaf_bindings").get<TextMap>();
            if (g.nodes.count(n.id)) throw FormatError("duplicate node id '" + n.id + "'");
            g.nodes.emplace(n.id, std::move(n));
        }
        for (const auto& je : j.at("edges")) {
            LabeledEdge e;
            e.source = je.at("source").get<std::string>();
            e.target = je.at("target").get<std::string>();
            e.label = je.at("label").get<std::string>();
            e.raw_label = je.value("raw_label", e.label);
            e.unresolved_continuation = je.value("unresolved_continuation", false);
            g.edges.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad graph file: ") + e.what());
    }
    g.canonicalize();
    return g;
}

SiteGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file '" + path + "'");
    try {
        return graph_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void save_graph(const SiteGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write graph file '" + path + "'");
    out << graph_to_json(graph).dump(2) << '\n';
}

}  // namespace sitespec
