#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "sitespec/reconstructor.hpp"
#include "support.hpp"

using namespace sitespec;
using sitespec::testing::fixture;
using sitespec::testing::fixture_program;
namespace fs = std::filesystem;

namespace {

void collect_origins(const TreeNode& n, std::set<std::string>& out, bool leaves_only = true) {
    if (!leaves_only || n.kind == "leaf") out.insert(n.origin);
    for (const auto& c : n.children) collect_origins(c, out, leaves_only);
}

std::set<std::string> leaf_origins(const PersonalizedTree& t) {
    std::set<std::string> out;
    if (t.root) collect_origins(*t.root, out);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("sitespec-pages-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

Residual senator_residual(const Assignment& a) { return partially_evaluate(fixture_program("senators/program.json"), a); }

}  // namespace

TEST(Tree, MirrorsProgramOneNodePerOccurrence) {
    const auto p = fixture_program("senators/program.json");
    const auto t = render_tree(p);
    EXPECT_EQ(t.size(), unfolded_size(p));
    EXPECT_EQ(t.distinct_ids(), node_count(p));
    EXPECT_EQ(t.root->guard, "root");
    EXPECT_EQ(t.root->origin, "congress");
    ASSERT_EQ(t.root->children.size(), 2u);
    EXPECT_EQ(t.root->children[0].guard, "Representatives");
    EXPECT_EQ(t.root->children[1].guard, "Senators");

    std::mt19937 rng(8);
    for (int i = 0; i < 300; ++i) {
        const auto q = sitespec::testing::random_program(rng);
        const auto r = partially_evaluate(q, sitespec::testing::random_assignment(rng, 8, 0.0, 0.3));
        const auto tq = render_tree(r);
        ASSERT_EQ(tq.size(), unfolded_size(r.program));
        ASSERT_EQ(tq.distinct_ids(), node_count(r.program));
    }
}

TEST(Tree, SenatorsDemResidual) {
    const auto t = render_tree(senator_residual({{"Senators", true}, {"Dem", true}}));
    ASSERT_TRUE(t.root);
    EXPECT_EQ(t.root->kind, "exclusive");
    EXPECT_EQ(t.root->origin, "sen_dem");
    ASSERT_EQ(t.root->children.size(), 2u);
    EXPECT_EQ(t.root->children[0].guard, "CA");
    EXPECT_EQ(t.root->children[0].kind, "leaf");
    EXPECT_EQ(t.root->children[0].url, "http://congress.example.gov/senate/dem/ca");
    EXPECT_EQ(t.root->children[1].guard, "NY");
    const auto j = t.to_json();
    EXPECT_EQ(j["children"][1]["bindings"]["URL"], "http://congress.example.gov/senate/dem/ny");
    EXPECT_EQ(j["children"][1]["children"].size(), 0u);
    EXPECT_TRUE(j["annotations"].is_object());
}

TEST(Tree, EmptyResidual) {
    const auto t = render_tree(senator_residual({{"Senators", false}, {"Representatives", false}}));
    EXPECT_TRUE(t.empty());
    EXPECT_EQ(t.size(), 0u);
    EXPECT_EQ(t.to_json(), (nlohmann::json{{"guard", "root"}, {"empty", true}, {"note", "no results"},
                                           {"children", nlohmann::json::array()}}));
    EXPECT_TRUE(focus(t).empty());
}

TEST(Tree, ElseArmAndPrunedArm) {
    EvalOptions off;
    off.exclusive_implication = false;
    const auto t = render_tree(partially_evaluate(fixture_program("senators/program.json"), {{"NY", true}}, off));
    const auto& dem = t.root->children[0].children[0];
    ASSERT_EQ(dem.children.size(), 2u);
    EXPECT_EQ(dem.children[0].guard, "CA");
    EXPECT_EQ(dem.children[1].guard, "else");

    const auto l = make_leaf({}, "u", {}, "l");
    const Program p{make_selector(BranchKind::exclusive, {{"x", nullptr}, {"y", l}}, {}, "s")};
    const auto tp = render_tree(p);
    ASSERT_EQ(tp.root->children.size(), 1u);
    EXPECT_EQ(tp.root->children[0].guard, "y");
}

TEST(Focus, KeepsSelectedSubtreesAndAncestors) {
    const auto p = fixture_program("bev/program.json");
    const auto r = partially_evaluate(p, {{"coffee", true}, {"shop", true}, {"coffee_shop", true}, {"cafe", true}});
    const auto full = render_tree(r);
    const auto f = focus(full);
    EXPECT_EQ(leaf_origins(f), (std::set<std::string>{"bollo", "btg_cafe", "mill", "shop_coffee"}));
    EXPECT_LT(f.size(), full.size());
    // Ancestors keep their own guards.
    std::set<std::string> all;
    collect_origins(*f.root, all, false);
    EXPECT_TRUE(all.count("food"));
    EXPECT_TRUE(all.count("btg"));
    EXPECT_FALSE(all.count("trails"));
    // Nothing selected: the whole tree.
    const auto whole = render_tree(p);
    EXPECT_EQ(focus(whole).to_json(), whole.to_json());
}

TEST(Report, FieldsInOrderWithUndetermined) {
    const auto c = load_composite(fixture("cascade/manifest.json"));
    const auto r = evaluate_composite(c, {{"Int", true}, {"Osc", true}, {"finite", true}, {"LowAcc", true}});
    EXPECT_EQ(render_report(r),
              "Algorithm: Trapezoidal Rule\nGAMS_annotation: undetermined\nNetlib: undetermined\nURL: undetermined\n");
    const auto full = evaluate_composite(
        c, {{"Int", true}, {"Osc", true}, {"finite", true}, {"HighAcc", true}, {"EndPtSing", true}});
    const auto text = render_report(full);
    EXPECT_NE(text.find("Algorithm: Clenshaw-Curtis Quadrature\n"), std::string::npos);
    EXPECT_NE(text.find("Netlib: Available in CMLIB (QUADPKD in Netlib)\n"), std::string::npos);
    EXPECT_NE(text.find("URL: http://www.netlib.org/quadpack/dqc25s.f\n"), std::string::npos);
}

TEST(Pages, OnePagePerTreeNode) {
    TempDir dir;
    const auto t = render_tree(senator_residual({{"Senators", true}, {"Dem", true}}));
    const auto files = emit_pages(t, dir.path().string());
    EXPECT_EQ(files, (std::vector<std::string>{"index.html", "page-1.html", "page-2.html"}));
    const auto index = slurp(dir.path() / "index.html");
    EXPECT_NE(index.find("<a href=\"page-1.html\">CA</a>"), std::string::npos);
    EXPECT_NE(index.find("<a href=\"page-2.html\">NY</a>"), std::string::npos);
    EXPECT_EQ(index.find(">up<"), std::string::npos);
    const auto ca = slurp(dir.path() / "page-1.html");
    EXPECT_NE(ca.find("<a href=\"index.html\">up</a>"), std::string::npos);
    EXPECT_NE(ca.find("href=\"http://congress.example.gov/senate/dem/ca\""), std::string::npos);
    EXPECT_NE(ca.find("<dt>URL</dt>"), std::string::npos);

    // Same tree, same bytes.
    TempDir again;
    emit_pages(t, again.path().string());
    for (const auto& f : files) EXPECT_EQ(slurp(dir.path() / f), slurp(again.path() / f)) << f;
}

TEST(Pages, EmptyTreeAndEscaping) {
    TempDir dir;
    EXPECT_EQ(emit_pages(PersonalizedTree{}, dir.path().string()), (std::vector<std::string>{"index.html"}));
    EXPECT_NE(slurp(dir.path() / "index.html").find("no results"), std::string::npos);

    TempDir esc;
    const Program p{make_leaf({{"k", "a<b"}}, "http://x/?a=1&b=2", {{"note", "\"quoted\" & <tagged>"}}, "l")};
    emit_pages(render_tree(p), esc.path().string());
    const auto html = slurp(esc.path() / "index.html");
    EXPECT_NE(html.find("a&lt;b"), std::string::npos);
    EXPECT_NE(html.find("http://x/?a=1&amp;b=2"), std::string::npos);
    EXPECT_NE(html.find("&quot;quoted&quot; &amp; &lt;tagged&gt;"), std::string::npos);
    EXPECT_EQ(html.find("<tagged>"), std::string::npos);
}
