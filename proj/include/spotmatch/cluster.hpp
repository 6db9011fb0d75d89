#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "spotmatch/match.hpp"

namespace spotmatch {

struct ClusterEdge {
    std::string a;  // a < b
    std::string b;
    double score = 0.0;

    bool operator==(const ClusterEdge&) const = default;
    auto operator<=>(const ClusterEdge&) const = default;
};

struct Cluster {
    std::string cluster_id;  // lowest member sequence id
    std::vector<std::string> members;
    std::vector<ClusterEdge> edges;
};

/// Match graph: nodes are videos, edges are accepted matches, clusters are
/// the connected components. Below-threshold cross-cluster candidates that
/// could not rebind are kept as conflicts for the report.
struct ClusterGraph {
    double threshold = 0.0;
    std::set<std::string> nodes;
    std::vector<ClusterEdge> edges;
    std::vector<ClusterEdge> conflicts;

    void add_node(const std::string& id) { nodes.insert(id); }
};

/// Insert one above-threshold candidate using the three-case procedure:
/// A) both endpoints free -> new two-node cluster; B) one free -> attach;
/// C) different clusters -> rebind the endpoint with the weaker binding
/// score if the candidate beats it, else record a conflict. Same cluster ->
/// reinforcement edge.
void sequential_insert(ClusterGraph& graph, const SimilarityRecord& candidate, double threshold);

/// Filter to score >= threshold, insert in canonical order (descending
/// score, ties by endpoint ids); nodes without surviving edges stay
/// singletons.
ClusterGraph build_clusters(const std::vector<SimilarityRecord>& records, double threshold,
                            const std::vector<std::string>& all_nodes = {});

/// Closed-form restatement: each node keeps only its best above-threshold
/// edge; clusters are components of the kept edges.
ClusterGraph best_edge_forest(const std::vector<SimilarityRecord>& records, double threshold,
                              const std::vector<std::string>& all_nodes = {});

/// Connected components ordered by lowest member id; members sorted.
std::vector<Cluster> components(const ClusterGraph& graph);

}  // namespace spotmatch
