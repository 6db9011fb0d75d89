#include "spotmatch/cluster.hpp"

#include <algorithm>

namespace spotmatch {

namespace {

ClusterEdge make_edge(const SimilarityRecord& r) {
    return {r.video_a, r.video_b, r.score};
}

// component of `start` over the given edges
std::set<std::string> reachable(const std::string& start, const std::vector<ClusterEdge>& edges) {
    std::set<std::string> seen{start};
    std::vector<std::string> stack{start};
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        for (const auto& e : edges) {
            const std::string* other = nullptr;
            if (e.a == cur) other = &e.b;
            else if (e.b == cur) other = &e.a;
            if (other && seen.insert(*other).second) stack.push_back(*other);
        }
    }
    return seen;
}

// strongest incident edge score; 0 if none
double binding_score(const std::string& node, const std::vector<ClusterEdge>& edges) {
    double best = 0.0;
    for (const auto& e : edges)
        if (e.a == node || e.b == node) best = std::max(best, e.score);
    return best;
}

bool in_multinode_cluster(const std::string& node, const std::vector<ClusterEdge>& edges) {
    for (const auto& e : edges)
        if (e.a == node || e.b == node) return true;
    return false;
}

}  // namespace

void sequential_insert(ClusterGraph& graph, const SimilarityRecord& candidate, double threshold) {
    graph.add_node(candidate.video_a);
    graph.add_node(candidate.video_b);
    if (candidate.score < threshold) return;  // callers filter; tolerate anyway

    const bool a_bound = in_multinode_cluster(candidate.video_a, graph.edges);
    const bool b_bound = in_multinode_cluster(candidate.video_b, graph.edges);

    if (!a_bound || !b_bound) {
        // cases A and B: at least one endpoint is free
        graph.edges.push_back(make_edge(candidate));
        return;
    }

    const auto comp_a = reachable(candidate.video_a, graph.edges);
    if (comp_a.count(candidate.video_b)) {
        // same cluster: reinforcement edge
        graph.edges.push_back(make_edge(candidate));
        return;
    }

    // case C: endpoints in different clusters
    const double bind_a = binding_score(candidate.video_a, graph.edges);
    const double bind_b = binding_score(candidate.video_b, graph.edges);
    if (candidate.score <= std::min(bind_a, bind_b)) {
        graph.conflicts.push_back(make_edge(candidate));
        return;
    }
    // detach the endpoint with the weaker binding; ties release video_b
    const std::string& loser = (bind_a < bind_b) ? candidate.video_a : candidate.video_b;
    std::erase_if(graph.edges, [&](const ClusterEdge& e) { return e.a == loser || e.b == loser; });
    graph.edges.push_back(make_edge(candidate));
}

ClusterGraph build_clusters(const std::vector<SimilarityRecord>& records, double threshold,
                            const std::vector<std::string>& all_nodes) {
    if (threshold <= 0.0) throw Error(ErrorCode::InvalidConfig, "threshold must be > 0");

    ClusterGraph graph;
    graph.threshold = threshold;
    for (const auto& n : all_nodes) graph.add_node(n);
    for (const auto& r : records) {
        graph.add_node(r.video_a);
        graph.add_node(r.video_b);
    }

    std::vector<SimilarityRecord> accepted;
    for (const auto& r : records)
        if (r.score >= threshold) accepted.push_back(r);
    std::sort(accepted.begin(), accepted.end(), [](const SimilarityRecord& x, const SimilarityRecord& y) {
        if (x.score != y.score) return x.score > y.score;
        return std::tie(x.video_a, x.video_b) < std::tie(y.video_a, y.video_b);
    });
    for (const auto& r : accepted) sequential_insert(graph, r, threshold);
    return graph;
}

ClusterGraph best_edge_forest(const std::vector<SimilarityRecord>& records, double threshold,
                              const std::vector<std::string>& all_nodes) {
    if (threshold <= 0.0) throw Error(ErrorCode::InvalidConfig, "threshold must be > 0");

    ClusterGraph graph;
    graph.threshold = threshold;
    for (const auto& n : all_nodes) graph.add_node(n);

    struct Best {
        std::string other;
        double score = -1.0;
    };
    std::map<std::string, Best> best;
    for (const auto& r : records) {
        graph.add_node(r.video_a);
        graph.add_node(r.video_b);
        if (r.score < threshold) continue;
        auto consider = [&](const std::string& self, const std::string& other) {
            Best& b = best[self];
            if (r.score > b.score || (r.score == b.score && (b.other.empty() || other < b.other))) {
                b.other = other;
                b.score = r.score;
            }
        };
        consider(r.video_a, r.video_b);
        consider(r.video_b, r.video_a);
    }

    std::set<ClusterEdge> kept;
    for (const auto& [node, b] : best) {
        if (b.score < 0.0) continue;
        ClusterEdge e{std::min(node, b.other), std::max(node, b.other), b.score};
        kept.insert(e);
    }
    graph.edges.assign(kept.begin(), kept.end());
    return graph;
}

std::vector<Cluster> components(const ClusterGraph& graph) {
    std::map<std::string, std::vector<std::pair<std::string, const ClusterEdge*>>> adj;
    for (const auto& e : graph.edges) {
        adj[e.a].emplace_back(e.b, &e);
        adj[e.b].emplace_back(e.a, &e);
    }

    std::vector<Cluster> out;
    std::set<std::string> visited;
    for (const auto& node : graph.nodes) {  // std::set iterates in sorted order
        if (visited.count(node)) continue;
        Cluster c;
        std::set<const ClusterEdge*> edge_set;
        std::vector<std::string> stack{node};
        visited.insert(node);
        while (!stack.empty()) {
            std::string cur = stack.back();
            stack.pop_back();
            c.members.push_back(cur);
            auto it = adj.find(cur);
            if (it == adj.end()) continue;
            for (const auto& [other, edge] : it->second) {
                edge_set.insert(edge);
                if (visited.insert(other).second) stack.push_back(other);
            }
        }
        std::sort(c.members.begin(), c.members.end());
        c.cluster_id = c.members.front();
        for (const auto* e : edge_set) c.edges.push_back(*e);
        std::sort(c.edges.begin(), c.edges.end());
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const Cluster& a, const Cluster& b) { return a.cluster_id < b.cluster_id; });
    return out;
}

}  // namespace spotmatch
