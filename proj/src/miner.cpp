#include "sitespec/miner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <tuple>

#include "sitespec/error.hpp"

namespace sitespec {

using nlohmann::json;

double MiningReport::compression_ratio() const {
    if (nodes_raw == 0) return 0.0;
    return static_cast<double>(nodes_raw - nodes_after_subsumption) / static_cast<double>(nodes_raw);
}

long MiningReport::compression_percent() const {
    return std::lround(compression_ratio() * 100.0);
}

MiningReport MiningReport::from_counts(std::size_t raw, std::size_t dedup, std::size_t typing,
                                       std::size_t subsumption) {
    MiningReport r;
    r.nodes_raw = raw;
    r.nodes_after_dedup = dedup;
    r.nodes_after_typing = typing;
    r.nodes_after_subsumption = subsumption;
    return r;
}

json MiningReport::to_json() const {
    json groups = json::array();
    for (const auto& g : merged_groups) {
        groups.push_back({{"stage", g.stage}, {"representative", g.representative}, {"members", g.members}});
    }
    json subs = json::array();
    for (const auto& s : subsumed) subs.push_back({{"node", s.node}, {"covers", s.covers}});
    json near = json::array();
    for (const auto& n : near_merges) near.push_back(n.members);
    return json{{"nodes_raw", nodes_raw},
                {"nodes_after_dedup", nodes_after_dedup},
                {"nodes_after_typing", nodes_after_typing},
                {"nodes_after_subsumption", nodes_after_subsumption},
                {"compression_ratio", compression_ratio()},
                {"compression_percent", compression_percent()},
                {"merged_groups", groups},
                {"subsumed", subs},
                {"near_merges", near},
                {"warnings", warnings},
                {"wall_ms", wall_ms}};
}

namespace {

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Rewires every edge through `rep_of` and drops nodes that are not their own
// representative. Node payloads are supplied by the caller.
SiteGraph rebuild(const SiteGraph& graph, const std::map<std::string, std::string>& rep_of,
                  std::map<std::string, GraphNode> nodes) {
    SiteGraph out;
    out.nodes = std::move(nodes);
    out.root = rep_of.at(graph.root);
    for (const auto& e : graph.edges) {
        LabeledEdge ne = e;
        ne.source = rep_of.at(e.source);
        ne.target = rep_of.at(e.target);
        out.edges.push_back(std::move(ne));
    }
    out.canonicalize();
    return out;
}

std::string pick_representative(const std::vector<std::string>& members, const std::string& root) {
    if (std::find(members.begin(), members.end(), root) != members.end()) return root;
    return *std::min_element(members.begin(), members.end());
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1: pages reached more than once during crawling

SiteGraph dedup_by_url(const SiteGraph& graph, MiningReport* report) {
    std::map<std::string, std::vector<std::string>> by_url;
    for (const auto& [id, n] : graph.nodes) by_url[trimmed(n.url)].push_back(id);

    std::map<std::string, std::string> rep_of;
    std::map<std::string, GraphNode> nodes;
    for (const auto& [url, members] : by_url) {
        const std::string rep = pick_representative(members, graph.root);
        GraphNode merged = graph.node(rep);
        if (members.size() > 1) {
            merged.annotations.clear();
            merged.leaf_bindings.clear();
            for (const auto& id : members) {
                const auto& n = graph.node(id);
                if (n.branch_kind != merged.branch_kind) {
                    throw MiningError("conflicting branch kinds for url '" + url + "'");
                }
                auto fold = [&](TextMap& into, const TextMap& from, const char* what) {
                    for (const auto& [k, v] : from) {
                        auto it = into.find(k);
                        if (it != into.end() && it->second != v && report) {
                            report->warnings.push_back(std::string(what) + " '" + k + "' on url '" + url +
                                                       "': '" + it->second + "' replaced by '" + v +
                                                       "' from node '" + id + "'");
                        }
                        into[k] = v;
                    }
                };
                fold(merged.annotations, n.annotations, "annotation");
                fold(merged.leaf_bindings, n.leaf_bindings, "binding");
            }
            if (report) report->merged_groups.push_back({"dedup", rep, members});
        }
        for (const auto& id : members) rep_of[id] = rep;
        nodes.emplace(rep, std::move(merged));
    }
    return rebuild(graph, rep_of, std::move(nodes));
}

// ---------------------------------------------------------------------------
// Stage 2: type minimization

namespace {

struct Indexed {
    std::vector<std::string> ids;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<std::pair<std::string, std::size_t>>> out, in;
};

Indexed index_graph(const SiteGraph& graph) {
    Indexed ix;
    for (const auto& [id, n] : graph.nodes) {
        ix.index[id] = ix.ids.size();
        ix.ids.push_back(id);
    }
    ix.out.resize(ix.ids.size());
    ix.in.resize(ix.ids.size());
    for (const auto& e : graph.edges) {
        auto s = ix.index.at(e.source), t = ix.index.at(e.target);
        ix.out[s].push_back({e.label, t});
        ix.in[t].push_back({e.label, s});
    }
    return ix;
}

std::vector<std::size_t> initial_classes(const SiteGraph& graph, const Indexed& ix) {
    // Leaves only merge with leaves carrying the same bindings and the same
    // annotation keys; internal nodes only with the same branch kind.
    std::map<std::string, std::size_t> keys;
    std::vector<std::size_t> cls(ix.ids.size());
    for (std::size_t i = 0; i < ix.ids.size(); ++i) {
        const auto& n = graph.node(ix.ids[i]);
        json key;
        if (ix.out[i].empty()) {
            std::vector<std::string> ann_keys;
            for (const auto& [k, v] : n.annotations) ann_keys.push_back(k);
            key = json{"leaf", n.leaf_bindings, ann_keys};
        } else {
            key = json{"internal", to_string(n.branch_kind)};
        }
        auto [it, inserted] = keys.emplace(key.dump(), keys.size());
        cls[i] = it->second;
    }
    return cls;
}

std::vector<std::size_t> refine(const Indexed& ix, std::vector<std::size_t> cls, bool use_in) {
    using Pairs = std::vector<std::pair<std::string, std::size_t>>;
    auto project = [&](const Pairs& edges) {
        Pairs p;
        p.reserve(edges.size());
        for (const auto& [label, other] : edges) p.emplace_back(label, cls[other]);
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
        return p;
    };
    std::size_t count = std::set<std::size_t>(cls.begin(), cls.end()).size();
    while (true) {
        std::map<std::tuple<std::size_t, Pairs, Pairs>, std::size_t> sigs;
        std::vector<std::size_t> next(cls.size());
        for (std::size_t i = 0; i < cls.size(); ++i) {
            auto key = std::make_tuple(cls[i], project(ix.out[i]), use_in ? project(ix.in[i]) : Pairs{});
            auto [it, inserted] = sigs.emplace(std::move(key), sigs.size());
            next[i] = it->second;
        }
        cls = std::move(next);
        if (sigs.size() == count) return cls;
        count = sigs.size();
    }
}

}  // namespace

std::map<std::string, std::size_t> type_partition(const SiteGraph& graph) {
    auto ix = index_graph(graph);
    auto cls = refine(ix, initial_classes(graph, ix), true);
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < cls.size(); ++i) out[ix.ids[i]] = cls[i];
    return out;
}

SiteGraph minimize_types(const SiteGraph& graph, MiningReport* report) {
    auto ix = index_graph(graph);
    auto cls = refine(ix, initial_classes(graph, ix), true);

    std::map<std::size_t, std::vector<std::string>> members_of;
    for (std::size_t i = 0; i < cls.size(); ++i) members_of[cls[i]].push_back(ix.ids[i]);

    std::map<std::string, std::string> rep_of;
    std::map<std::string, GraphNode> nodes;
    for (const auto& [c, members] : members_of) {
        const std::string rep = pick_representative(members, graph.root);
        GraphNode merged = graph.node(rep);
        for (const auto& id : members) {
            rep_of[id] = rep;
            if (id == rep) continue;
            const auto& other = graph.node(id);
            // Representative keeps its annotations; differing ones from the
            // other members are retained under "<key>#<member id>".
            for (const auto& [k, v] : other.annotations) {
                auto it = graph.node(rep).annotations.find(k);
                if (it == graph.node(rep).annotations.end() || it->second != v) {
                    merged.annotations[k + "#" + id] = v;
                }
            }
            if (other.url != merged.url) merged.annotations["url#" + id] = other.url;
        }
        if (members.size() > 1 && report) report->merged_groups.push_back({"typing", rep, members});
        nodes.emplace(rep, std::move(merged));
    }
    return rebuild(graph, rep_of, std::move(nodes));
}

// ---------------------------------------------------------------------------
// Stage 3: multi-type subsumption

namespace {

struct Shape {
    std::vector<bool> cyclic;
    std::vector<std::size_t> height;
};

// Tarjan SCC to find cycle members, then longest-path height over the
// condensation.
Shape analyze(const Indexed& ix) {
    const std::size_t n = ix.ids.size();
    std::vector<long> order(n, -1), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack, comp(n, 0), comp_size;
    long counter = 0;
    std::function<void(std::size_t)> strong = [&](std::size_t v) {
        order[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (const auto& [label, w] : ix.out[v]) {
            if (order[w] < 0) {
                strong(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], order[w]);
            }
        }
        if (low[v] == order[v]) {
            std::size_t size = 0, id = comp_size.size();
            while (true) {
                auto w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp[w] = id;
                ++size;
                if (w == v) break;
            }
            comp_size.push_back(size);
        }
    };
    for (std::size_t v = 0; v < n; ++v) {
        if (order[v] < 0) strong(v);
    }

    Shape shape{std::vector<bool>(n, false), std::vector<std::size_t>(n, 0)};
    for (std::size_t v = 0; v < n; ++v) {
        shape.cyclic[v] = comp_size[comp[v]] > 1;
        for (const auto& [label, w] : ix.out[v]) {
            if (w == v) shape.cyclic[v] = true;
        }
    }
    std::vector<bool> done(n, false);
    std::function<std::size_t(std::size_t)> height = [&](std::size_t v) -> std::size_t {
        if (done[v]) return shape.height[v];
        done[v] = true;
        std::size_t h = 0;
        for (const auto& [label, w] : ix.out[v]) {
            if (comp[w] == comp[v]) continue;
            h = std::max(h, height(w) + 1);
        }
        shape.height[v] = h;
        return h;
    };
    for (std::size_t v = 0; v < n; ++v) height(v);
    return shape;
}

using OutSet = std::set<std::pair<std::string, std::size_t>>;

bool next_combination(std::vector<std::size_t>& pick, std::size_t pool) {
    const std::size_t k = pick.size();
    for (std::size_t i = k; i-- > 0;) {
        if (pick[i] < pool - k + i) {
            ++pick[i];
            for (std::size_t j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
            return true;
        }
    }
    return false;
}

// Finds one removable node; returns false when none qualifies.
bool subsume_one(SiteGraph& graph, std::size_t max_cover, MiningReport* report) {
    auto ix = index_graph(graph);
    auto shape = analyze(ix);
    const std::size_t n = ix.ids.size();
    std::vector<OutSet> outs(n);
    for (std::size_t v = 0; v < n; ++v) outs[v] = OutSet(ix.out[v].begin(), ix.out[v].end());
    auto kind = [&](std::size_t v) { return graph.node(ix.ids[v]).branch_kind; };
    const std::size_t root = ix.index.at(graph.root);

    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < n; ++v) {
        if (v == root || outs[v].empty() || ix.in[v].empty() || shape.cyclic[v]) continue;
        candidates.push_back(v);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](auto a, auto b) {
        return shape.height[a] < shape.height[b];
    });

    for (auto x : candidates) {
        std::vector<std::size_t> pool;
        for (std::size_t c = 0; c < n; ++c) {
            if (c == x || c == root || outs[c].empty() || shape.cyclic[c]) continue;
            if (shape.height[c] != shape.height[x]) continue;
            if (!std::includes(outs[x].begin(), outs[x].end(), outs[c].begin(), outs[c].end())) continue;
            pool.push_back(c);
        }
        const bool parents_inclusive = std::all_of(ix.in[x].begin(), ix.in[x].end(), [&](const auto& p) {
            return kind(p.second) == BranchKind::inclusive;
        });
        for (std::size_t k = 1; k <= std::min(max_cover, pool.size()); ++k) {
            std::vector<std::size_t> pick(k);
            for (std::size_t i = 0; i < k; ++i) pick[i] = i;
            do {
                OutSet uni;
                for (auto i : pick) uni.insert(outs[pool[i]].begin(), outs[pool[i]].end());
                if (uni != outs[x]) continue;
                bool kinds_ok;
                if (k == 1) {
                    kinds_ok = kind(pool[pick[0]]) == kind(x);
                } else {
                    // Splitting one arm into several only keeps evaluation
                    // semantics when every selector involved is inclusive.
                    kinds_ok = parents_inclusive && kind(x) == BranchKind::inclusive &&
                               std::all_of(pick.begin(), pick.end(), [&](auto i) {
                                   return kind(pool[i]) == BranchKind::inclusive;
                               });
                }
                if (!kinds_ok) continue;

                const std::string& removed = ix.ids[x];
                Subsumption record{removed, {}};
                for (auto i : pick) record.covers.push_back(ix.ids[pool[i]]);
                std::vector<LabeledEdge> edges;
                for (const auto& e : graph.edges) {
                    if (e.source == removed) continue;
                    if (e.target == removed) {
                        for (const auto& cover : record.covers) {
                            LabeledEdge ne = e;
                            ne.target = cover;
                            edges.push_back(std::move(ne));
                        }
                        continue;
                    }
                    edges.push_back(e);
                }
                graph.edges = std::move(edges);
                graph.nodes.erase(removed);
                graph.canonicalize();
                if (report) report->subsumed.push_back(std::move(record));
                return true;
            } while (next_combination(pick, pool.size()));
        }
    }
    return false;
}

}  // namespace

SiteGraph subsume_composites(const SiteGraph& graph, std::size_t max_cover, MiningReport* report) {
    SiteGraph out = graph;
    if (max_cover == 0) return out;
    while (subsume_one(out, max_cover, report)) {
    }
    return out;
}

// ---------------------------------------------------------------------------

MineResult mine(const SiteGraph& graph, const MineOptions& options) {
    auto start = std::chrono::steady_clock::now();
    MineResult result;
    auto& report = result.report;
    report.nodes_raw = graph.nodes.size();

    SiteGraph g = dedup_by_url(graph, &report);
    report.nodes_after_dedup = g.nodes.size();
    g = minimize_types(g, &report);
    report.nodes_after_typing = g.nodes.size();
    g = subsume_composites(g, options.max_cover, &report);
    // Removing a node changes its covers' incoming pairs, which can make new
    // type merges possible; alternate until neither stage changes anything.
    while (true) {
        const auto before = g.nodes.size();
        g = minimize_types(g, &report);
        g = subsume_composites(g, options.max_cover, &report);
        if (g.nodes.size() == before) break;
    }
    report.nodes_after_subsumption = g.nodes.size();

    if (options.lossy) {
        auto ix = index_graph(g);
        auto init = initial_classes(g, ix);
        auto out_only = refine(ix, init, false);
        auto full = refine(ix, init, true);
        std::map<std::size_t, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < out_only.size(); ++i) groups[out_only[i]].push_back(i);
        for (const auto& [c, members] : groups) {
            std::set<std::size_t> split;
            for (auto m : members) split.insert(full[m]);
            if (split.size() < 2) continue;
            NearMerge near;
            for (auto m : members) near.members.push_back(ix.ids[m]);
            report.near_merges.push_back(std::move(near));
        }
    }

    result.graph = std::move(g);
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace sitespec
