#pragma once

#include <map>
#include <string>
#include <vector>

#include "spotmatch/sift.hpp"

namespace spotmatch {

struct MatchPair {
    int query_keypoint = 0;
    int ref_keypoint = 0;
    double distance = 0.0;

    bool operator==(const MatchPair&) const = default;
};

struct SimilarityRecord {
    std::string video_a;  // video_a < video_b lexicographically
    std::string video_b;
    double score = 0.0;
    int best_frame_a = -1;
    int best_frame_b = -1;
    int n_contributing_matches = 0;
    bool same_camera_location = false;

    bool operator==(const SimilarityRecord&) const = default;
};

struct MatchConfig {
    double ratio = 0.8;
    bool skip_same_sequence = true;  // no self-pairs in score_all
};

/// Per-video feature sets, one descriptor list per sampled frame.
struct VideoFeatures {
    std::string sequence_id;
    std::string camera_location_id;
    std::vector<int> frame_indices;
    std::vector<std::vector<Descriptor>> frames;  // parallel to frame_indices
};

/// Lowe ratio test with mutual cross-check. Deterministic: nearest-neighbor
/// ties resolve to the lowest reference index.
std::vector<MatchPair> ratio_match(const std::vector<Descriptor>& query,
                                   const std::vector<Descriptor>& reference, double ratio);

/// Sum over matches of 1 / (1 + d^2); adding a match never lowers the score.
double frame_score(const std::vector<MatchPair>& matches);

SimilarityRecord video_score(const VideoFeatures& a, const VideoFeatures& b,
                             const MatchConfig& cfg);

/// One record per unordered video pair, sorted by (video_a, video_b).
/// `workers` bounds data parallelism; the output is identical for any count.
std::vector<SimilarityRecord> score_all(const std::vector<VideoFeatures>& videos,
                                        const MatchConfig& cfg, int workers = 1);

}  // namespace spotmatch
