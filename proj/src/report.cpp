#include "spotmatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace spotmatch {

namespace {

// deterministic RNG independent of the standard library's distributions
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * (1.0 / 9007199254740992.0); }
};

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

double edge_stroke_width(double score, double threshold, double max_score) {
    constexpr double w_min = 1.5, w_max = 8.0;
    if (max_score <= threshold) return w_min;
    const double t = std::clamp((score - threshold) / (max_score - threshold), 0.0, 1.0);
    return w_min + (w_max - w_min) * t;
}

GraphLayout layout_graph(const ClusterGraph& graph, uint64_t seed) {
    const auto clusters = components(graph);
    GraphLayout layout;
    if (clusters.empty()) {
        layout.width = layout.height = 200.0;
        return layout;
    }

    size_t max_members = 1;
    for (const auto& c : clusters) max_members = std::max(max_members, c.members.size());
    const double cell =
        std::max(180.0, 90.0 * std::ceil(std::sqrt(static_cast<double>(max_members))) + 90.0);
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(clusters.size()))));

    for (size_t ci = 0; ci < clusters.size(); ci++) {
        const auto& c = clusters[ci];
        const double ox = (ci % cols) * cell;
        const double oy = (ci / cols) * cell;
        const double pad = 40.0;
        const double span = cell - 2.0 * pad;

        SplitMix64 rng(seed ^ (0x1234567ULL * (ci + 1)));
        std::map<std::string, NodePosition> pos;
        for (const auto& m : c.members)
            pos[m] = {pad + rng.uniform() * span, pad + rng.uniform() * span};

        if (c.members.size() > 1) {
            // small Fruchterman-Reingold pass inside the cell
            const double k = span / std::sqrt(static_cast<double>(c.members.size()));
            const int iters = 150;
            for (int it = 0; it < iters; it++) {
                std::map<std::string, NodePosition> disp;
                for (const auto& m : c.members) disp[m] = {0, 0};
                for (auto a = c.members.begin(); a != c.members.end(); ++a) {
                    for (auto b = std::next(a); b != c.members.end(); ++b) {
                        double dx = pos[*a].x - pos[*b].x, dy = pos[*a].y - pos[*b].y;
                        double d = std::max(1e-3, std::hypot(dx, dy));
                        double f = k * k / d;
                        disp[*a].x += dx / d * f;
                        disp[*a].y += dy / d * f;
                        disp[*b].x -= dx / d * f;
                        disp[*b].y -= dy / d * f;
                    }
                }
                for (const auto& e : c.edges) {
                    double dx = pos[e.a].x - pos[e.b].x, dy = pos[e.a].y - pos[e.b].y;
                    double d = std::max(1e-3, std::hypot(dx, dy));
                    double f = d * d / k;
                    disp[e.a].x -= dx / d * f;
                    disp[e.a].y -= dy / d * f;
                    disp[e.b].x += dx / d * f;
                    disp[e.b].y += dy / d * f;
                }
                const double temp = 0.1 * span * (1.0 - static_cast<double>(it) / iters);
                for (const auto& m : c.members) {
                    double d = std::max(1e-6, std::hypot(disp[m].x, disp[m].y));
                    double step = std::min(d, temp);
                    pos[m].x = std::clamp(pos[m].x + disp[m].x / d * step, pad, pad + span);
                    pos[m].y = std::clamp(pos[m].y + disp[m].y / d * step, pad, pad + span);
                }
            }
        } else {
            pos[c.members.front()] = {cell / 2.0, cell / 2.0};
        }
        for (const auto& [m, p] : pos) layout.positions[m] = {ox + p.x, oy + p.y};
    }

    const int rows = static_cast<int>((clusters.size() + cols - 1) / cols);
    layout.width = cols * cell;
    layout.height = rows * cell;
    return layout;
}

std::string render_html(const ClusterGraph& graph, const GraphLayout& layout,
                        const ReportMetadata& metadata,
                        const std::map<std::string, std::string>& thumbnails_png_base64) {
    const auto clusters = components(graph);
    double max_score = graph.threshold;
    for (const auto& e : graph.edges) max_score = std::max(max_score, e.score);

    auto camera_of = [&](const std::string& id) -> std::string {
        auto it = metadata.camera_location.find(id);
        return it == metadata.camera_location.end() ? std::string() : it->second;
    };
    auto same_camera = [&](const ClusterEdge& e) {
        const std::string ca = camera_of(e.a), cb = camera_of(e.b);
        return !ca.empty() && ca == cb;
    };

    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\"/>\n<title>"
        << xml_escape(metadata.title) << "</title>\n<style>\n"
        << "body { font-family: sans-serif; margin: 1.5em; }\n"
        << "table { border-collapse: collapse; margin-bottom: 1.5em; }\n"
        << "td, th { border: 1px solid #999; padding: 2px 8px; font-size: 13px; }\n"
        << "svg { border: 1px solid #ccc; background: #fafafa; }\n"
        << "</style>\n</head>\n<body>\n";
    out << "<h1>" << xml_escape(metadata.title) << "</h1>\n";
    out << "<p>" << clusters.size() << " clusters, " << graph.nodes.size() << " videos, "
        << graph.edges.size() << " matches at threshold " << fmt(graph.threshold)
        << ". Dashed edges join videos from the same camera location; treat them with care, "
        << "static background detail can imitate a pattern match.</p>\n";

    const double W = std::max(layout.width, 200.0), H = std::max(layout.height, 200.0);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\""
        << fmt(H) << "\" viewBox=\"0 0 " << fmt(W) << " " << fmt(H) << "\">\n";
    for (const auto& e : graph.edges) {
        auto pa = layout.positions.find(e.a);
        auto pb = layout.positions.find(e.b);
        if (pa == layout.positions.end() || pb == layout.positions.end()) continue;
        out << "<line x1=\"" << fmt(pa->second.x) << "\" y1=\"" << fmt(pa->second.y)
            << "\" x2=\"" << fmt(pb->second.x) << "\" y2=\"" << fmt(pb->second.y)
            << "\" stroke=\"#444\" stroke-width=\""
            << fmt(edge_stroke_width(e.score, graph.threshold, max_score)) << "\"";
        if (same_camera(e)) out << " stroke-dasharray=\"6,4\"";
        out << "/>\n";
    }
    for (const auto& [id, p] : layout.positions) {
        out << "<circle cx=\"" << fmt(p.x) << "\" cy=\"" << fmt(p.y)
            << "\" r=\"14\" fill=\"#6699cc\" stroke=\"#224466\"/>\n";
        auto thumb = thumbnails_png_base64.find(id);
        if (thumb != thumbnails_png_base64.end()) {
            out << "<image x=\"" << fmt(p.x - 32) << "\" y=\"" << fmt(p.y + 18)
                << "\" width=\"64\" height=\"48\" href=\"data:image/png;base64,"
                << thumb->second << "\"/>\n";
        }
        out << "<text x=\"" << fmt(p.x) << "\" y=\"" << fmt(p.y - 18)
            << "\" text-anchor=\"middle\" font-size=\"11\">" << xml_escape(id);
        const std::string cam = camera_of(id);
        if (!cam.empty()) out << " @" << xml_escape(cam);
        out << "</text>\n";
    }
    out << "</svg>\n";

    out << "<h2>Clusters</h2>\n<table>\n<tr><th>cluster</th><th>members</th></tr>\n";
    for (const auto& c : clusters) {
        out << "<tr><td>" << xml_escape(c.cluster_id) << "</td><td>";
        for (size_t i = 0; i < c.members.size(); i++) {
            if (i) out << ", ";
            out << xml_escape(c.members[i]);
            auto flag = metadata.multi_detection.find(c.members[i]);
            if (flag != metadata.multi_detection.end() && flag->second) out << " *";
        }
        out << "</td></tr>\n";
    }
    out << "</table>\n";
    if (!metadata.multi_detection.empty())
        out << "<p>* frames with more than one detection; the single-individual "
               "assumption may not hold there.</p>\n";

    out << "<h2>Conflicts</h2>\n";
    if (graph.conflicts.empty()) {
        out << "<p>none</p>\n";
    } else {
        out << "<table>\n<tr><th>video a</th><th>video b</th><th>score</th></tr>\n";
        for (const auto& e : graph.conflicts)
            out << "<tr><td>" << xml_escape(e.a) << "</td><td>" << xml_escape(e.b) << "</td><td>"
                << fmt(e.score) << "</td></tr>\n";
        out << "</table>\n";
    }
    out << "</body>\n</html>\n";
    return out.str();
}

TableExports export_tables(const ClusterGraph& graph, const std::vector<SimilarityRecord>& records) {
    TableExports t;
    std::ostringstream membership;
    membership << "cluster_id,sequence_id\n";
    for (const auto& c : components(graph))
        for (const auto& m : c.members) membership << c.cluster_id << ',' << m << "\n";
    t.membership_csv = membership.str();

    std::set<std::pair<std::string, std::string>> accepted;
    for (const auto& e : graph.edges) accepted.emplace(e.a, e.b);

    std::vector<SimilarityRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const SimilarityRecord& a, const SimilarityRecord& b) {
        return std::tie(a.video_a, a.video_b) < std::tie(b.video_a, b.video_b);
    });
    std::ostringstream pairs;
    pairs << "video_a,video_b,score,same_camera_location,accepted\n";
    for (const auto& r : sorted) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.9g", r.score);
        pairs << r.video_a << ',' << r.video_b << ',' << buf << ','
              << (r.same_camera_location ? "true" : "false") << ','
              << (accepted.count({r.video_a, r.video_b}) ? "true" : "false") << "\n";
    }
    t.pairs_csv = pairs.str();
    return t;
}

}  // namespace spotmatch
