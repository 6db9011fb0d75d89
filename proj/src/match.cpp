#include "spotmatch/match.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace spotmatch {

namespace {

double dist_sq(const Descriptor& a, const Descriptor& b) {
    double acc = 0.0;
    for (int i = 0; i < 128; i++) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

struct NearestTwo {
    int idx1 = -1;
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
};

NearestTwo nearest_two(const Descriptor& q, const std::vector<Descriptor>& refs) {
    NearestTwo n;
    for (size_t j = 0; j < refs.size(); j++) {
        const double d = dist_sq(q, refs[j]);
        if (d < n.d1) {
            n.d2 = n.d1;
            n.d1 = d;
            n.idx1 = static_cast<int>(j);
        } else if (d < n.d2) {
            n.d2 = d;
        }
    }
    return n;
}

bool passes_ratio(const NearestTwo& n, double ratio) {
    if (n.idx1 < 0) return false;
    if (n.d2 == 0.0) return n.d1 == 0.0;  // tie at zero: accept only exact duplicates
    if (std::isinf(n.d2)) return n.d1 == 0.0;  // single reference: only exact hit
    return std::sqrt(n.d1) / std::sqrt(n.d2) < ratio;
}

}  // namespace

std::vector<MatchPair> ratio_match(const std::vector<Descriptor>& query,
                                   const std::vector<Descriptor>& reference, double ratio) {
    if (ratio <= 0.0 || ratio > 1.0)
        throw Error(ErrorCode::InvalidConfig, "ratio must be in (0, 1]");

    std::vector<MatchPair> out;
    if (query.empty() || reference.empty()) return out;

    // forward pass
    std::vector<NearestTwo> fwd(query.size());
    for (size_t i = 0; i < query.size(); i++) fwd[i] = nearest_two(query[i], reference);

    // reverse pass, only for referenced indices
    std::vector<NearestTwo> rev(reference.size());
    std::vector<bool> rev_done(reference.size(), false);
    for (size_t i = 0; i < query.size(); i++) {
        if (!passes_ratio(fwd[i], ratio)) continue;
        const int j = fwd[i].idx1;
        if (!rev_done[j]) {
            rev[j] = nearest_two(reference[j], query);
            rev_done[j] = true;
        }
        if (!passes_ratio(rev[j], ratio)) continue;
        if (rev[j].idx1 != static_cast<int>(i)) continue;  // not mutual
        out.push_back({static_cast<int>(i), j, std::sqrt(fwd[i].d1)});
    }
    return out;
}

double frame_score(const std::vector<MatchPair>& matches) {
    double score = 0.0;
    for (const auto& m : matches) score += 1.0 / (1.0 + m.distance * m.distance);
    return score;
}

SimilarityRecord video_score(const VideoFeatures& a, const VideoFeatures& b,
                             const MatchConfig& cfg) {
    const bool swap = a.sequence_id > b.sequence_id;
    const VideoFeatures& va = swap ? b : a;
    const VideoFeatures& vb = swap ? a : b;

    SimilarityRecord rec;
    rec.video_a = va.sequence_id;
    rec.video_b = vb.sequence_id;
    rec.same_camera_location = va.camera_location_id == vb.camera_location_id;

    for (size_t ia = 0; ia < va.frames.size(); ia++) {
        for (size_t ib = 0; ib < vb.frames.size(); ib++) {
            const auto matches = ratio_match(va.frames[ia], vb.frames[ib], cfg.ratio);
            const double score = frame_score(matches);
            if (score > rec.score) {
                rec.score = score;
                rec.best_frame_a = va.frame_indices[ia];
                rec.best_frame_b = vb.frame_indices[ib];
                rec.n_contributing_matches = static_cast<int>(matches.size());
            }
        }
    }
    if (rec.best_frame_a < 0 && !va.frames.empty() && !vb.frames.empty()) {
        rec.best_frame_a = va.frame_indices[0];
        rec.best_frame_b = vb.frame_indices[0];
    }
    return rec;
}

std::vector<SimilarityRecord> score_all(const std::vector<VideoFeatures>& videos,
                                        const MatchConfig& cfg, int workers) {
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < videos.size(); i++)
        for (size_t j = i + 1; j < videos.size(); j++) {
            if (cfg.skip_same_sequence && videos[i].sequence_id == videos[j].sequence_id) continue;
            pairs.emplace_back(i, j);
        }

    std::vector<SimilarityRecord> records(pairs.size());
    workers = std::max(1, workers);
    if (workers == 1 || pairs.size() < 2) {
        for (size_t k = 0; k < pairs.size(); k++)
            records[k] = video_score(videos[pairs[k].first], videos[pairs[k].second], cfg);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; t++) {
            pool.emplace_back([&]() {
                for (;;) {
                    const size_t k = next.fetch_add(1);
                    if (k >= pairs.size()) return;
                    records[k] = video_score(videos[pairs[k].first], videos[pairs[k].second], cfg);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    std::sort(records.begin(), records.end(), [](const SimilarityRecord& a, const SimilarityRecord& b) {
        return std::tie(a.video_a, a.video_b) < std::tie(b.video_a, b.video_b);
    });
    return records;
}

}  // namespace spotmatch
