#pragma once

// Site graph data model: ingestion of crawl dumps, label normalization and
// structural validation.

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sitespec {

using TextMap = std::map<std::string, std::string>;

enum class BranchKind { exclusive, inclusive };

std::string_view to_string(BranchKind kind);
BranchKind branch_kind_from_string(std::string_view text);

struct GraphNode {
    std::string id;
    std::string url;
    TextMap annotations;
    BranchKind branch_kind = BranchKind::exclusive;
    TextMap leaf_bindings;

    friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct LabeledEdge {
    std::string source;
    std::string target;
    std::string raw_label;
    std::string label;
    // Raw label ended in the continuation marker and no continuation entry
    // was found; `label` then holds the truncated text.
    bool unresolved_continuation = false;

    friend bool operator==(const LabeledEdge&, const LabeledEdge&) = default;
    friend auto operator<=>(const LabeledEdge& a, const LabeledEdge& b) {
        if (auto c = a.source <=> b.source; c != 0) return c;
        if (auto c = a.label <=> b.label; c != 0) return c;
        if (auto c = a.target <=> b.target; c != 0) return c;
        return a.raw_label <=> b.raw_label;
    }
};

// Nodes are keyed by id and edges kept sorted, so two graphs built from the
// same records compare equal regardless of record order.
struct SiteGraph {
    std::map<std::string, GraphNode> nodes;
    std::vector<LabeledEdge> edges;
    std::string root;

    bool contains(const std::string& id) const { return nodes.count(id) != 0; }
    const GraphNode& node(const std::string& id) const;

    // Sorts edges and drops exact duplicates (same source, label, target).
    void canonicalize();

    friend bool operator==(const SiteGraph&, const SiteGraph&) = default;
};

// Per-node edge lists, built on demand. Indices point into graph.edges.
struct Adjacency {
    std::map<std::string, std::vector<std::size_t>> out;
    std::map<std::string, std::vector<std::size_t>> in;
};
Adjacency adjacency(const SiteGraph& graph);

struct NormalizationConfig {
    std::set<std::string> stopwords;
    bool stemming = false;
    bool case_fold = true;
    TextMap label_continuations;
    // Token-level stemming overrides, consulted before the suffix rules.
    TextMap stem_overrides;

    static NormalizationConfig from_json(const nlohmann::json& j);
    static NormalizationConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

inline constexpr std::string_view kContinuationMarker = "...";

std::string stem_token(const std::string& token, const NormalizationConfig& config);
std::string normalize_label(std::string_view raw, const NormalizationConfig& config);
// Tokens of a normalized label (split on '_').
std::vector<std::string> label_tokens(std::string_view normalized);

struct OutLink {
    std::string label;
    std::string target;
};

struct CrawlRecord {
    std::string id;
    std::string url;
    bool root = false;
    BranchKind kind = BranchKind::exclusive;
    TextMap annotations;
    TextMap leaf_bindings;
    std::vector<OutLink> out;

    static CrawlRecord from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Reads one JSON object per non-blank line.
std::vector<CrawlRecord> read_crawl_dump(std::istream& in);
std::vector<CrawlRecord> load_crawl_dump(const std::string& path);

SiteGraph ingest_crawl(const std::vector<CrawlRecord>& records, const NormalizationConfig& config);
SiteGraph ingest_crawl(std::istream& in, const NormalizationConfig& config);

enum class IssueKind {
    missing_root,
    unreachable,
    duplicate_label,
    empty_label,
    dangling_edge,
    empty_url,
    leaf_with_edges,
    unresolved_continuation,
};

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
    IssueKind kind;
    bool warning = false;
    std::string node;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool empty() const { return issues.empty(); }
    // No errors; warnings allowed.
    bool ok() const;
    std::size_t count(IssueKind kind) const;
    nlohmann::json to_json() const;
};

ValidationReport validate(const SiteGraph& graph);

nlohmann::json graph_to_json(const SiteGraph& graph);
SiteGraph graph_from_json(const nlohmann::json& j);
SiteGraph load_graph(const std::string& path);
void save_graph(const SiteGraph& graph, const std::string& path);

}  // namespace sitespec
