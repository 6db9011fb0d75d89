#pragma once

#include <map>
#include <string>
#include <vector>

#include "spotmatch/cluster.hpp"

namespace spotmatch {

struct NodePosition {
    double x = 0.0;
    double y = 0.0;
};

struct GraphLayout {
    std::map<std::string, NodePosition> positions;  // canvas units
    double width = 0.0;
    double height = 0.0;
};

struct ReportMetadata {
    std::map<std::string, std::string> camera_location;  // sequence_id -> camera id
    std::map<std::string, bool> multi_detection;         // flagged sequences
    std::string title = "Individual identification report";
};

/// Seeded force-directed layout inside per-cluster cells arranged on a grid;
/// cells never overlap and the result is a pure function of (graph, seed).
GraphLayout layout_graph(const ClusterGraph& graph, uint64_t seed);

/// Self-contained HTML with one inline SVG. Edge stroke width grows
/// monotonically with score; same-camera-location edges are dashed.
/// Thumbnails, when given, are embedded as base64 PNG data URIs.
std::string render_html(const ClusterGraph& graph, const GraphLayout& layout,
                        const ReportMetadata& metadata,
                        const std::map<std::string, std::string>& thumbnails_png_base64 = {});

/// Edge width rule shared with the renderer; exposed for tests.
double edge_stroke_width(double score, double threshold, double max_score);

struct TableExports {
    std::string membership_csv;  // cluster_id, sequence_id
    std::string pairs_csv;       // video_a, video_b, score, same_camera_location, accepted
};

TableExports export_tables(const ClusterGraph& graph, const std::vector<SimilarityRecord>& records);

}  // namespace spotmatch
