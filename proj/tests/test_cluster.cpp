#include <doctest.h>

#include <algorithm>
#include <random>

#include "spotmatch/cluster.hpp"

using namespace spotmatch;

namespace {

SimilarityRecord rec(const std::string& a, const std::string& b, double score) {
    SimilarityRecord r;
    r.video_a = std::min(a, b);
    r.video_b = std::max(a, b);
    r.score = score;
    return r;
}

std::vector<std::vector<std::string>> partition_of(const ClusterGraph& g) {
    std::vector<std::vector<std::string>> out;
    for (const auto& c : components(g)) out.push_back(c.members);
    return out;
}

// random full symmetric score matrix over n nodes
std::vector<SimilarityRecord> random_records(int n, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SimilarityRecord> out;
    for (int i = 0; i < n; i++)
        for (int j = i + 1; j < n; j++) {
            char a[8], b[8];
            std::snprintf(a, sizeof(a), "n%02d", i);
            std::snprintf(b, sizeof(b), "n%02d", j);
            out.push_back(rec(a, b, u(rng)));
        }
    return out;
}

// O(n^3) transitive-closure oracle over the graph's edges
std::vector<std::vector<std::string>> closure_oracle(const ClusterGraph& g) {
    std::vector<std::string> nodes(g.nodes.begin(), g.nodes.end());
    const int n = (int)nodes.size();
    auto idx = [&](const std::string& s) {
        return (int)(std::lower_bound(nodes.begin(), nodes.end(), s) - nodes.begin());
    };
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    for (int i = 0; i < n; i++) reach[i][i] = 1;
    for (const auto& e : g.edges) reach[idx(e.a)][idx(e.b)] = reach[idx(e.b)][idx(e.a)] = 1;
    for (int k = 0; k < n; k++)
        for (int i = 0; i < n; i++)
            for (int j = 0; j < n; j++)
                if (reach[i][k] && reach[k][j]) reach[i][j] = 1;

    std::vector<std::vector<std::string>> out;
    std::vector<char> used(n, 0);
    for (int i = 0; i < n; i++) {
        if (used[i]) continue;
        std::vector<std::string> comp;
        for (int j = 0; j < n; j++)
            if (reach[i][j]) {
                comp.push_back(nodes[j]);
                used[j] = 1;
            }
        out.push_back(comp);
    }
    return out;
}

}  // namespace

TEST_CASE("case A creates a fresh two-node cluster") {
    ClusterGraph g;
    g.threshold = 0.5;
    sequential_insert(g, rec("1", "2", 0.9), 0.5);
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].members == std::vector<std::string>{"1", "2"});
}

TEST_CASE("case B attaches the free endpoint") {
    ClusterGraph g;
    g.threshold = 0.5;
    sequential_insert(g, rec("1", "2", 0.9), 0.5);
    sequential_insert(g, rec("2", "3", 0.85), 0.5);
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].members == std::vector<std::string>{"1", "2", "3"});
}

TEST_CASE("case C moves the weaker-bound node") {
    ClusterGraph g;
    g.threshold = 0.5;
    sequential_insert(g, rec("1", "2", 0.9), 0.5);
    sequential_insert(g, rec("3", "4", 0.6), 0.5);
    sequential_insert(g, rec("2", "3", 0.7), 0.5);
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0].members == std::vector<std::string>{"1", "2", "3"});
    CHECK(clusters[1].members == std::vector<std::string>{"4"});
    CHECK(g.conflicts.empty());
}

TEST_CASE("case C below both bindings records a conflict") {
    ClusterGraph g;
    g.threshold = 0.5;
    sequential_insert(g, rec("1", "2", 0.9), 0.5);
    sequential_insert(g, rec("3", "4", 0.8), 0.5);
    sequential_insert(g, rec("2", "3", 0.7), 0.5);
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 2);
    REQUIRE(g.conflicts.size() == 1);
    CHECK(g.conflicts[0] == ClusterEdge{"2", "3", 0.7});
}

TEST_CASE("same-cluster candidate becomes a reinforcement edge") {
    ClusterGraph g;
    g.threshold = 0.5;
    sequential_insert(g, rec("1", "2", 0.9), 0.5);
    sequential_insert(g, rec("2", "3", 0.8), 0.5);
    sequential_insert(g, rec("1", "3", 0.7), 0.5);
    CHECK(g.edges.size() == 3);
    CHECK(components(g).size() == 1);
}

TEST_CASE("build_clusters validates the threshold") {
    CHECK_THROWS_AS(build_clusters({}, 0.0), Error);
    CHECK_THROWS_AS(build_clusters({}, -1.0), Error);
}

TEST_CASE("nothing above threshold leaves every video a singleton") {
    const std::vector<SimilarityRecord> records{rec("a", "b", 0.2), rec("b", "c", 0.3)};
    const auto g = build_clusters(records, 0.5, {"a", "b", "c", "d"});
    CHECK(g.edges.empty());
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 4);
    for (const auto& c : clusters) CHECK(c.members.size() == 1);
}

TEST_CASE("ten-video fixture reproduces the expected three clusters") {
    // score matrix whose above-threshold structure matches the worked example:
    // one four-video individual, one five-video individual, one unmatched video
    std::vector<SimilarityRecord> records{
        rec("v3", "v4", 0.92), rec("v4", "v6", 0.81), rec("v6", "v7", 0.74),
        rec("v0", "v1", 0.88), rec("v1", "v2", 0.79), rec("v2", "v5", 0.66),
        rec("v5", "v8", 0.61),
        // distractors below the threshold, including everything touching v9
        rec("v0", "v9", 0.31), rec("v9", "v4", 0.22), rec("v0", "v3", 0.18),
        rec("v7", "v8", 0.40),
    };
    const auto g = build_clusters(records, 0.5);
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 3);
    CHECK(clusters[0].members == std::vector<std::string>{"v0", "v1", "v2", "v5", "v8"});
    CHECK(clusters[1].members == std::vector<std::string>{"v3", "v4", "v6", "v7"});
    CHECK(clusters[2].members == std::vector<std::string>{"v9"});
    CHECK(clusters[2].edges.empty());
    for (const auto& e : g.edges) CHECK(e.score >= 0.5);
}

TEST_CASE("build_clusters is input-order independent") {
    std::mt19937 rng(5);
    auto records = random_records(12, rng);
    const auto base = build_clusters(records, 0.5);
    for (int trial = 0; trial < 10; trial++) {
        std::shuffle(records.begin(), records.end(), rng);
        const auto g = build_clusters(records, 0.5);
        CHECK(g.edges == base.edges);
        CHECK(partition_of(g) == partition_of(base));
    }
}

TEST_CASE("best_edge_forest trivial and star cases") {
    const auto two = best_edge_forest({rec("a", "b", 0.9)}, 0.5);
    CHECK(partition_of(two) == std::vector<std::vector<std::string>>{{"a", "b"}});

    // B, C, D each best-match A
    const std::vector<SimilarityRecord> star{rec("A", "B", 0.9), rec("A", "C", 0.8),
                                             rec("A", "D", 0.7), rec("B", "C", 0.55)};
    const auto g = best_edge_forest(star, 0.5);
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].members == std::vector<std::string>{"A", "B", "C", "D"});
}

TEST_CASE("sequential clustering equals the best-edge forest on random matrices") {
    std::mt19937 rng(1234);
    for (int trial = 0; trial < 300; trial++) {
        const int n = 2 + (int)(rng() % 20);
        const auto records = random_records(n, rng);
        const double threshold = 0.3 + 0.4 * (double)(rng() % 100) / 100.0;
        const auto seq = build_clusters(records, threshold);
        const auto forest = best_edge_forest(records, threshold);
        CHECK(partition_of(seq) == partition_of(forest));
    }
}

TEST_CASE("components match the transitive-closure oracle") {
    std::mt19937 rng(77);
    for (int trial = 0; trial < 50; trial++) {
        const int n = 2 + (int)(rng() % 60);
        ClusterGraph g;
        g.threshold = 0.5;
        for (int i = 0; i < n; i++) {
            char name[8];
            std::snprintf(name, sizeof(name), "n%02d", i);
            g.add_node(name);
        }
        const int n_edges = (int)(rng() % (2 * n));
        for (int e = 0; e < n_edges; e++) {
            const int i = (int)(rng() % n), j = (int)(rng() % n);
            if (i == j) continue;
            char a[8], b[8];
            std::snprintf(a, sizeof(a), "n%02d", std::min(i, j));
            std::snprintf(b, sizeof(b), "n%02d", std::max(i, j));
            g.edges.push_back({a, b, 0.9});
        }
        CHECK(partition_of(g) == closure_oracle(g));
    }
}

TEST_CASE("components handles chains and isolated nodes") {
    ClusterGraph g;
    for (const char* n : {"1", "2", "3", "4", "5"}) g.add_node(n);
    CHECK(components(g).size() == 5);
    g.edges.push_back({"1", "2", 0.9});
    g.edges.push_back({"2", "3", 0.8});
    const auto clusters = components(g);
    REQUIRE(clusters.size() == 3);
    CHECK(clusters[0].members == std::vector<std::string>{"1", "2", "3"});
    CHECK(clusters[0].cluster_id == "1");
}

TEST_CASE("raising the threshold refines the clustering") {
    std::mt19937 rng(4242);
    for (int trial = 0; trial < 40; trial++) {
        const int n = 3 + (int)(rng() % 15);
        const auto records = random_records(n, rng);
        std::vector<std::vector<std::string>> prev;
        size_t prev_edges = SIZE_MAX;
        for (double threshold : {0.3, 0.45, 0.6, 0.75, 0.9}) {
            const auto g = build_clusters(records, threshold);
            CHECK(g.edges.size() <= prev_edges);
            prev_edges = g.edges.size();

            const auto part = partition_of(g);
            if (!prev.empty()) {
                // every cluster at the higher threshold fits in one lower cluster
                for (const auto& hi : part) {
                    int containing = 0;
                    for (const auto& lo : prev)
                        if (std::includes(lo.begin(), lo.end(), hi.begin(), hi.end())) containing++;
                    CHECK(containing == 1);
                }
            }
            prev = part;
        }
    }
}

TEST_CASE("every node lands in exactly one cluster") {
    std::mt19937 rng(9);
    const auto records = random_records(25, rng);
    const auto g = build_clusters(records, 0.6);
    std::set<std::string> seen;
    for (const auto& c : components(g))
        for (const auto& m : c.members) CHECK(seen.insert(m).second);
    CHECK(seen == g.nodes);
}
