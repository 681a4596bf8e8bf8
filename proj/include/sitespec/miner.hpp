#pragma once

// Schema compression over site graphs: url dedup, type minimization by
// partition refinement, and subsumption of nodes whose links are the union
// of other nodes' links.

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "sitespec/graph.hpp"

namespace sitespec {

struct MergedGroup {
    std::string stage;  // "dedup" or "typing"
    std::string representative;
    std::vector<std::string> members;  // includes the representative
};

struct Subsumption {
    std::string node;
    std::vector<std::string> covers;
};

// Nodes that agree on outgoing (label, class) pairs but were kept apart
// because their incoming pairs differ. Reported only, never applied.
struct NearMerge {
    std::vector<std::string> members;
};

struct MiningReport {
    std::size_t nodes_raw = 0;
    std::size_t nodes_after_dedup = 0;
    std::size_t nodes_after_typing = 0;
    std::size_t nodes_after_subsumption = 0;
    std::vector<MergedGroup> merged_groups;
    std::vector<Subsumption> subsumed;
    std::vector<NearMerge> near_merges;
    std::vector<std::string> warnings;
    double wall_ms = 0.0;

    double compression_ratio() const;
    // Ratio as a whole percentage, e.g. 0.1375 -> 14.
    long compression_percent() const;
    nlohmann::json to_json() const;

    static MiningReport from_counts(std::size_t raw, std::size_t dedup, std::size_t typing,
                                    std::size_t subsumption);
};

SiteGraph dedup_by_url(const SiteGraph& graph, MiningReport* report = nullptr);
SiteGraph minimize_types(const SiteGraph& graph, MiningReport* report = nullptr);
SiteGraph subsume_composites(const SiteGraph& graph, std::size_t max_cover = 2,
                             MiningReport* report = nullptr);

struct MineOptions {
    std::size_t max_cover = 2;
    bool lossy = false;  // report near-merges
};

struct MineResult {
    SiteGraph graph;
    MiningReport report;
};

MineResult mine(const SiteGraph& graph, const MineOptions& options = {});

// Class index per node id for the coarsest partition that is stable under
// both outgoing and incoming (label, class) pairs. Exposed for testing.
std::map<std::string, std::size_t> type_partition(const SiteGraph& graph);

}  // namespace sitespec
