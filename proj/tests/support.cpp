#include "support.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

namespace sitespec::testing {

std::string fixture(const std::string& relative) { return std::string(SITESPEC_FIXTURE_DIR) + "/" + relative; }

Program fixture_program(const std::string& relative) { return load_program(fixture(relative)).program; }

NormalizationConfig fixture_config(const std::string& relative) { return NormalizationConfig::load(fixture(relative)); }

SiteGraph fixture_graph(const std::string& dump, const std::string& config) {
    return ingest_crawl(load_crawl_dump(fixture(dump)), fixture_config(config));
}

std::string var_name(std::size_t i) { return "v" + std::to_string(i); }

namespace {

bool chance(std::mt19937& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::size_t pick(std::mt19937& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

}  // namespace

std::size_t path_count(const Program& program) {
    if (program.empty()) return 0;
    std::unordered_map<const ProgramNode*, std::size_t> memo;
    std::function<std::size_t(const NodePtr&)> count = [&](const NodePtr& n) -> std::size_t {
        if (!n) return 0;
        if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
        std::size_t total = 0;
        if (n->is_leaf()) {
            total = 1;
        } else {
            for (const auto& arm : n->selector().arms) total += count(arm.body);
        }
        memo.emplace(n.get(), total);
        return total;
    };
    return count(program.root);
}

Program random_program(std::mt19937& rng, const GenOptions& options) {
    while (true) {
        std::size_t created = 0;
        std::vector<NodePtr> pool;
        std::function<NodePtr(int)> gen = [&](int depth) -> NodePtr {
            if (!pool.empty() && depth > 0 && chance(rng, options.share)) return pool[pick(rng, pool.size())];
            const std::string origin = "n" + std::to_string(created++);
            const bool leaf = depth >= options.max_depth || created + 1 >= options.max_nodes ||
                              (depth > 0 && chance(rng, 0.3));
            NodePtr node;
            if (leaf) {
                TextMap bindings;
                if (chance(rng, 0.5)) bindings["x"] = chance(rng, 0.5) ? "a" : "b";
                if (chance(rng, 0.3)) bindings["y"] = "y" + std::to_string(pick(rng, 3));
                node = make_leaf(std::move(bindings), "u" + origin, {}, origin);
            } else {
                const bool inclusive = !options.exclusive_only && chance(rng, options.inclusive);
                const int max_arms = std::min<int>(options.max_arms, static_cast<int>(options.variables));
                const int n = std::uniform_int_distribution<int>(1, max_arms)(rng);
                std::vector<std::size_t> vars(options.variables);
                for (std::size_t i = 0; i < vars.size(); ++i) vars[i] = i;
                std::shuffle(vars.begin(), vars.end(), rng);
                std::vector<Arm> arms;
                for (int i = 0; i < n; ++i) {
                    const std::size_t v = inclusive ? pick(rng, options.variables) : vars[static_cast<std::size_t>(i)];
                    arms.push_back({var_name(v), gen(depth + 1)});
                }
                TextMap ann;
                if (chance(rng, 0.2)) ann["note"] = origin;
                node = make_selector(inclusive ? BranchKind::inclusive : BranchKind::exclusive, std::move(arms),
                                     std::move(ann), origin);
            }
            pool.push_back(node);
            return node;
        };
        Program p{gen(0)};
        if (node_count(p) <= options.max_nodes && path_count(p) <= options.max_paths) return p;
    }
}

Assignment random_assignment(std::mt19937& rng, std::size_t variables, double p_true, double p_false) {
    Assignment a;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < variables; ++i) {
        const double r = u(rng);
        if (r < p_true) {
            a.set(var_name(i), true);
        } else if (r < p_true + p_false) {
            a.set(var_name(i), false);
        }
    }
    return a;
}

Assignment random_full_assignment(std::mt19937& rng, std::size_t variables, double p_true) {
    Assignment a;
    for (std::size_t i = 0; i < variables; ++i) a.set(var_name(i), chance(rng, p_true));
    return a;
}

std::pair<Assignment, Assignment> random_split(std::mt19937& rng, const Assignment& a) {
    Assignment a1, a2;
    for (const auto& [k, v] : a.values()) (chance(rng, 0.5) ? a1 : a2).set(k, v);
    return {a1, a2};
}

std::string random_label(std::mt19937& rng, std::size_t max_len) {
    static const std::vector<std::string> pieces = {
        "a", "b", "e", "s", "i", "u", "r", "y", "S", "E", "R", "Q", "0", "7", " ", " ", "_", "-", "&",
        ".", "'", "/", "\xC3\xA9", "\xE2\x80\xA6", "ers", "ies", "sses", "ss", "us", "is", "ing"};
    const std::size_t n = pick(rng, max_len + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += pieces[pick(rng, pieces.size())];
    return out;
}

}  // namespace sitespec::testing
