#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "sitespec/error.hpp"
#include "sitespec/program.hpp"
#include "support.hpp"

using namespace sitespec;
using nlohmann::json;

namespace {

SiteGraph senator_graph() {
    return sitespec::testing::fixture_graph("senators/crawl.jsonl", "senators/config.json");
}

// Label sequences of a graph walk that skips edges back onto the current
// DFS stack, ending with the leaf id.
std::set<std::vector<std::string>> graph_paths_without_back_edges(const SiteGraph& g) {
    std::set<std::vector<std::string>> out;
    const auto adj = adjacency(g);
    std::vector<std::string> labels;
    std::set<std::string> stack;
    std::function<void(const std::string&)> walk = [&](const std::string& id) {
        stack.insert(id);
        bool any = false;
        if (auto it = adj.out.find(id); it != adj.out.end()) {
            for (auto idx : it->second) {
                const auto& e = g.edges[idx];
                if (stack.count(e.target)) continue;
                any = true;
                labels.push_back(e.label);
                walk(e.target);
                labels.pop_back();
            }
        }
        if (!any) {
            auto p = labels;
            p.push_back(id);
            out.insert(std::move(p));
        }
        stack.erase(id);
    };
    walk(g.root);
    return out;
}

std::set<std::vector<std::string>> program_paths(const Program& p) {
    std::set<std::vector<std::string>> out;
    for (const auto& path : enumerate_paths(p)) {
        auto v = path.guards;
        v.push_back(path.leaf->origin);
        out.insert(std::move(v));
    }
    return out;
}

// 20 nodes: a binary-ish tree with one edge from deep down back to the root
// and one sideways edge that creates sharing.
SiteGraph cyclic_graph() {
    SiteGraph g;
    g.root = "n00";
    auto id = [](int i) { return std::string(i < 10 ? "n0" : "n") + std::to_string(i); };
    for (int i = 0; i < 20; ++i) g.nodes[id(i)] = GraphNode{id(i), "u" + id(i), {}, BranchKind::exclusive, {}};
    for (int i = 1; i < 20; ++i) {
        const int parent = (i - 1) / 2;
        g.edges.push_back({id(parent), id(i), "", "c" + std::to_string(i % 2), false});
    }
    g.edges.push_back({id(17), id(0), "", "home", false});
    g.edges.push_back({id(6), id(9), "", "see_also", false});
    for (auto& e : g.edges) e.raw_label = e.label;
    g.canonicalize();
    return g;
}

}  // namespace

TEST(Build, SenatorShape) {
    const auto result = build_program(senator_graph());
    EXPECT_TRUE(result.cross_references.empty());
    EXPECT_EQ(node_count(result.program), 13u);
    EXPECT_EQ(unfolded_size(result.program), 13u);
    EXPECT_EQ(enumerate_paths(result.program).size(), 8u);
    EXPECT_EQ(guard_variables(result.program),
              (std::vector<std::string>{"CA", "Dem", "Ind", "NY", "Rep", "Representatives", "Senators"}));
    EXPECT_EQ(binding_variables(result.program), (std::vector<std::string>{"URL"}));
    EXPECT_TRUE(exclusive_guards_distinct(result.program));
    EXPECT_EQ(program_paths(result.program), graph_paths_without_back_edges(senator_graph()));
}

TEST(Build, BackEdgeToRootBecomesCrossReference) {
    const auto g = cyclic_graph();
    const auto result = build_program(g);
    ASSERT_EQ(result.cross_references.size(), 1u);
    EXPECT_EQ(result.cross_references[0], (CrossReference{"n17", "n00", "home"}));
    EXPECT_EQ(program_paths(result.program), graph_paths_without_back_edges(g));
    // n09 is reached twice but built once.
    EXPECT_EQ(node_count(result.program), 20u);
    EXPECT_GT(unfolded_size(result.program), node_count(result.program));
}

TEST(Build, RandomGraphsMatchPathOracle) {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> coin(0, 99);
    for (int round = 0; round < 100; ++round) {
        SiteGraph g;
        const int n = 5 + round % 20;
        auto id = [](int i) { return "g" + std::to_string(100 + i); };
        for (int i = 0; i < n; ++i) {
            g.nodes[id(i)] = GraphNode{id(i), id(i), {}, coin(rng) < 50 ? BranchKind::exclusive : BranchKind::inclusive, {}};
        }
        g.root = id(0);
        for (int i = 0; i < n - 1; ++i) {
            const int fan = 1 + coin(rng) % 3;
            for (int k = 0; k < fan; ++k) {
                const int t = i + 1 + coin(rng) % std::min(5, n - i - 1);
                // Distinct labels per source keep exclusive nodes valid.
                g.edges.push_back({id(i), id(t), "", "l" + std::to_string(k), false});
            }
        }
        // Back edges target the root, which is on every DFS stack, so the
        // oracle's view of them does not depend on build order.
        if (coin(rng) < 50) g.edges.push_back({id(coin(rng) % n), id(0), "", "back", false});
        for (auto& e : g.edges) e.raw_label = e.label;
        g.canonicalize();
        const auto result = build_program(g);
        ASSERT_EQ(program_paths(result.program), graph_paths_without_back_edges(g)) << "round " << round;
    }
}

TEST(Build, Errors) {
    SiteGraph g;
    g.root = "r";
    g.nodes["r"] = GraphNode{"r", "r", {}, BranchKind::exclusive, {}};
    g.nodes["a"] = GraphNode{"a", "a", {}, BranchKind::exclusive, {}};
    g.nodes["b"] = GraphNode{"b", "b", {}, BranchKind::exclusive, {}};
    g.edges = {{"r", "a", "x", "x", false}, {"r", "b", "x", "x", false}};
    EXPECT_THROW(build_program(g), Error);
    g.nodes["r"].branch_kind = BranchKind::inclusive;
    EXPECT_EQ(enumerate_paths(build_program(g).program).size(), 2u);
    g.edges = {{"r", "a", "", "", false}};
    EXPECT_THROW(build_program(g), Error);
    g.root = "missing";
    EXPECT_THROW(build_program(g), Error);
}

TEST(Serialize, RoundTripRandomPrograms) {
    std::mt19937 rng(23);
    for (int i = 0; i < 300; ++i) {
        const auto p = sitespec::testing::random_program(rng);
        const std::string bytes = serialize(p);
        const auto back = deserialize(bytes);
        ASSERT_TRUE(structurally_equal(back.program, p));
        ASSERT_EQ(node_count(back.program), node_count(p));
        ASSERT_EQ(serialize(back.program), bytes);
    }
}

TEST(Serialize, SharedNodesEmittedOnce) {
    const auto leaf = make_leaf({{"k", "v"}}, "u", {}, "l");
    const auto p = Program{make_selector(BranchKind::inclusive, {{"a", leaf}, {"b", leaf}}, {}, "r")};
    const auto j = program_to_json(p);
    EXPECT_EQ(j["nodes"].size(), 2u);
    const auto back = program_from_json(j).program;
    const auto& arms = back.root->selector().arms;
    EXPECT_EQ(arms[0].body.get(), arms[1].body.get());
}

TEST(Serialize, EmptyProgramAndCrossReferences) {
    const auto back = deserialize(serialize(Program{}, {{"a", "b", "c"}}));
    EXPECT_TRUE(back.program.empty());
    ASSERT_EQ(back.cross_references.size(), 1u);
    EXPECT_EQ(back.cross_references[0], (CrossReference{"a", "b", "c"}));
}

TEST(Serialize, RejectsBadInput) {
    EXPECT_THROW(deserialize("not json"), FormatError);
    EXPECT_THROW(deserialize("{}"), FormatError);
    const json cyclic = {{"format", "sitespec-program"},
                         {"version", 1},
                         {"root", "a"},
                         {"nodes",
                          {{"a", {{"kind", "exclusive"}, {"arms", {{{"guard", "x"}, {"body", "b"}}}}}},
                           {"b", {{"kind", "exclusive"}, {"arms", {{{"guard", "y"}, {"body", "a"}}}}}}}}};
    EXPECT_THROW(program_from_json(cyclic), FormatError);
    json unknown = cyclic;
    unknown["nodes"]["b"] = {{"kind", "maybe"}};
    EXPECT_THROW(program_from_json(unknown), FormatError);
    json missing = cyclic;
    missing["nodes"].erase("b");
    EXPECT_THROW(program_from_json(missing), FormatError);
    EXPECT_THROW(load_program("/nonexistent/program.json"), Error);
}

TEST(StructuralEquality, DetectsDifferences) {
    const auto l1 = make_leaf({{"k", "v"}}, "u", {}, "l");
    const auto l2 = make_leaf({{"k", "w"}}, "u", {}, "l");
    const auto a = Program{make_selector(BranchKind::exclusive, {{"x", l1}}, {}, "r")};
    const auto b = Program{make_selector(BranchKind::exclusive, {{"x", l2}}, {}, "r")};
    const auto c = Program{make_selector(BranchKind::inclusive, {{"x", l1}}, {}, "r")};
    const auto d = Program{make_selector(BranchKind::exclusive, {{"y", l1}}, {}, "r")};
    EXPECT_TRUE(structurally_equal(a, a));
    EXPECT_FALSE(structurally_equal(a, b));
    EXPECT_FALSE(structurally_equal(a, c));
    EXPECT_FALSE(structurally_equal(a, d));
    EXPECT_FALSE(structurally_equal(a, Program{}));
    EXPECT_TRUE(structurally_equal(Program{}, Program{}));
}

TEST(Paths, SortedAndUnconditionalArmsAddNoGuard) {
    const auto l1 = make_leaf({}, "u1", {}, "l1");
    const auto l2 = make_leaf({}, "u2", {}, "l2");
    const auto p = Program{make_selector(BranchKind::inclusive, {{"z", l1}, {"", l2}}, {}, "r")};
    const auto paths = path_keys(enumerate_paths(p));
    ASSERT_EQ(paths.size(), 2u);
    EXPECT_TRUE(paths[0].first.empty());
    EXPECT_EQ(paths[1].first, (std::vector<std::string>{"z"}));
}

TEST(Pseudo, SenatorListing) {
    const auto p = build_program(senator_graph()).program;
    const std::string text = render_pseudo(p);
    EXPECT_EQ(text.rfind("if (Representatives)\n", 0), 0u);
    EXPECT_NE(text.find("else if (Senators)\n   if (Dem)\n      if (CA)\n"), std::string::npos);
    EXPECT_EQ(render_pseudo(Program{}), "/* empty */\n");
}
