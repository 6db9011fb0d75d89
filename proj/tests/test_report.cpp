#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <vector>

#include "spotmatch/report.hpp"

using namespace spotmatch;

namespace {

SimilarityRecord rec(const std::string& a, const std::string& b, double score) {
    SimilarityRecord r;
    r.video_a = std::min(a, b);
    r.video_b = std::max(a, b);
    r.score = score;
    return r;
}

ClusterGraph fixture_graph() {
    const std::vector<SimilarityRecord> records{
        rec("v3", "v4", 0.92), rec("v4", "v6", 0.81), rec("v6", "v7", 0.74),
        rec("v0", "v1", 0.88), rec("v1", "v2", 0.79), rec("v2", "v5", 0.66),
        rec("v5", "v8", 0.61), rec("v0", "v9", 0.31),
    };
    return build_clusters(records, 0.5);
}

// minimal tag-balance checker: every opened element is closed in order;
// self-closing and void elements are accepted
bool tags_balanced(const std::string& html, std::string* err) {
    static const std::set<std::string> kVoid{"meta", "br", "hr", "img", "link", "input"};
    std::vector<std::string> open;
    size_t i = 0;
    while ((i = html.find('<', i)) != std::string::npos) {
        const size_t end = html.find('>', i);
        if (end == std::string::npos) {
            *err = "unterminated tag";
            return false;
        }
        std::string tag = html.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) continue;
        if (tag[0] == '!') continue;  // doctype / comment
        const bool closing = tag[0] == '/';
        const bool self_closing = tag.back() == '/';
        if (closing) tag = tag.substr(1);
        if (self_closing) tag.pop_back();
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
        if (name.empty()) {
            *err = "nameless tag";
            return false;
        }
        if (closing) {
            if (open.empty() || open.back() != name) {
                *err = "mismatched </" + name + ">";
                return false;
            }
            open.pop_back();
        } else if (!self_closing && !kVoid.count(name)) {
            open.push_back(name);
        }
    }
    if (!open.empty()) {
        *err = "unclosed <" + open.back() + ">";
        return false;
    }
    return true;
}

int count_of(const std::string& haystack, const std::string& needle) {
    int n = 0;
    for (size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size()))
        n++;
    return n;
}

}  // namespace

TEST_CASE("edge stroke width is monotone and bounded") {
    CHECK(edge_stroke_width(5.0, 1.0, 1.0) == 1.5);  // no spread: constant minimum
    CHECK(edge_stroke_width(1.0, 1.0, 9.0) == 1.5);
    CHECK(edge_stroke_width(9.0, 1.0, 9.0) == 8.0);
    double prev = 0.0;
    for (double s = 1.0; s <= 9.0; s += 0.5) {
        const double w = edge_stroke_width(s, 1.0, 9.0);
        CHECK(w >= prev);
        CHECK(w >= 1.5);
        CHECK(w <= 8.0);
        prev = w;
    }
    // scores outside the range are clamped
    CHECK(edge_stroke_width(0.0, 1.0, 9.0) == 1.5);
    CHECK(edge_stroke_width(99.0, 1.0, 9.0) == 8.0);
}

TEST_CASE("layout is a pure function of graph and seed") {
    const auto g = fixture_graph();
    const auto l1 = layout_graph(g, 42);
    const auto l2 = layout_graph(g, 42);
    CHECK(l1.positions.size() == g.nodes.size());
    REQUIRE(l2.positions.size() == l1.positions.size());
    for (const auto& [id, p] : l1.positions) {
        CHECK(l2.positions.at(id).x == p.x);
        CHECK(l2.positions.at(id).y == p.y);
    }
    const auto l3 = layout_graph(g, 43);
    bool any_moved = false;
    for (const auto& [id, p] : l1.positions)
        if (l3.positions.at(id).x != p.x || l3.positions.at(id).y != p.y) any_moved = true;
    CHECK(any_moved);
}

TEST_CASE("layout keeps nodes inside the canvas and apart") {
    const auto g = fixture_graph();
    const auto l = layout_graph(g, 7);
    CHECK(l.width > 0.0);
    CHECK(l.height > 0.0);
    std::vector<NodePosition> pts;
    for (const auto& [id, p] : l.positions) {
        CHECK(p.x >= 0.0);
        CHECK(p.y >= 0.0);
        CHECK(p.x <= l.width);
        CHECK(p.y <= l.height);
        pts.push_back(p);
    }
    for (size_t i = 0; i < pts.size(); i++)
        for (size_t j = i + 1; j < pts.size(); j++)
            CHECK((pts[i].x != pts[j].x || pts[i].y != pts[j].y));
}

TEST_CASE("empty graph still yields a drawable layout") {
    ClusterGraph g;
    const auto l = layout_graph(g, 1);
    CHECK(l.positions.empty());
    CHECK(l.width == 200.0);
    CHECK(l.height == 200.0);
}

TEST_CASE("rendered report is balanced, self-contained and complete") {
    auto g = fixture_graph();
    g.conflicts.push_back({"v2", "v3", 0.58});
    const auto layout = layout_graph(g, 11);

    ReportMetadata meta;
    for (const auto& n : g.nodes) meta.camera_location[n] = (n < "v5") ? "camA" : "camB";
    meta.multi_detection["v4"] = true;
    const std::map<std::string, std::string> thumbs{{"v0", "aGVsbG8="}};

    const std::string html = render_html(g, layout, meta, thumbs);

    std::string err;
    CHECK_MESSAGE(tags_balanced(html, &err), err);
    for (const auto& n : g.nodes) CHECK(html.find(">" + n) != std::string::npos);
    CHECK(html.find("data:image/png;base64,aGVsbG8=") != std::string::npos);
    CHECK(html.find("stroke-dasharray") != std::string::npos);  // v3-v4 is same-camera
    CHECK(html.find("v4 *") != std::string::npos);
    CHECK(html.find("0.58") != std::string::npos);  // conflict row

    // the only URL-looking string is the SVG namespace identifier
    std::string stripped = html;
    const std::string ns = "xmlns=\"http://www.w3.org/2000/svg\"";
    const size_t at = stripped.find(ns);
    REQUIRE(at != std::string::npos);
    stripped.erase(at, ns.size());
    CHECK(stripped.find("http://") == std::string::npos);
    CHECK(stripped.find("https://") == std::string::npos);
    CHECK(stripped.find("src=") == std::string::npos);
    CHECK(count_of(html, "<svg") == 1);
    CHECK(count_of(html, "<circle") == (int)g.nodes.size());
    CHECK(count_of(html, "<line") == (int)g.edges.size());
}

TEST_CASE("report without metadata or conflicts renders cleanly") {
    const auto g = fixture_graph();
    const std::string html = render_html(g, layout_graph(g, 3), ReportMetadata{});
    std::string err;
    CHECK_MESSAGE(tags_balanced(html, &err), err);
    CHECK(html.find("stroke-dasharray") == std::string::npos);
    CHECK(html.find("<h2>Conflicts</h2>") != std::string::npos);
    CHECK(html.find("<p>none</p>") != std::string::npos);
}

TEST_CASE("special characters in ids are escaped") {
    ClusterGraph g;
    g.threshold = 0.5;
    g.add_node("a<b&c");
    const std::string html = render_html(g, layout_graph(g, 1), ReportMetadata{});
    CHECK(html.find("a&lt;b&amp;c") != std::string::npos);
    CHECK(html.find("a<b&c") == std::string::npos);
    std::string err;
    CHECK_MESSAGE(tags_balanced(html, &err), err);
}

TEST_CASE("export tables cover every node and record") {
    const auto g = fixture_graph();
    const std::vector<SimilarityRecord> records{
        rec("v3", "v4", 0.92), rec("v0", "v9", 0.31), rec("v2", "v5", 0.66)};
    const auto tables = export_tables(g, records);

    CHECK(count_of(tables.membership_csv, "\n") == (int)g.nodes.size() + 1);
    CHECK(tables.membership_csv.rfind("cluster_id,sequence_id\n", 0) == 0);
    for (const auto& n : g.nodes)
        CHECK(tables.membership_csv.find("," + n + "\n") != std::string::npos);

    CHECK(count_of(tables.pairs_csv, "\n") == (int)records.size() + 1);
    CHECK(tables.pairs_csv.find("v3,v4,0.92,false,true") != std::string::npos);
    CHECK(tables.pairs_csv.find("v0,v9,0.31,false,false") != std::string::npos);
    // rows are sorted by the video pair
    CHECK(tables.pairs_csv.find("v0,v9") < tables.pairs_csv.find("v2,v5"));
    CHECK(tables.pairs_csv.find("v2,v5") < tables.pairs_csv.find("v3,v4"));
}
