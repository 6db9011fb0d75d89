#include "spotmatch/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spotmatch/ingest.hpp"
#include "spotmatch/store.hpp"

namespace fs = std::filesystem;

namespace spotmatch {

GroundTruthLabels load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    GroundTruthLabels labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        if (line_no == 1 && line == "sequence_id,individual_id") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error(ErrorCode::Parse, path + ": missing comma at line " + std::to_string(line_no));
        labels[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return labels;
}

void save_labels(const GroundTruthLabels& labels, const std::string& path) {
    std::ostringstream out;
    out << "sequence_id,individual_id\n";
    for (const auto& [seq, ind] : labels) out << seq << ',' << ind << "\n";
    atomic_write(path, out.str());
}

EvaluationReport evaluate(const ClusterGraph& graph, const GroundTruthLabels& labels) {
    EvaluationReport report;
    for (const auto& e : graph.edges) {
        auto la = labels.find(e.a);
        auto lb = labels.find(e.b);
        if (la == labels.end() || lb == labels.end()) {
            report.n_unverifiable++;
            continue;
        }
        report.n_matches++;
        if (la->second == lb->second) report.n_correct++;
    }
    if (report.n_matches > 0)
        report.success_rate = static_cast<double>(report.n_correct) / report.n_matches;

    for (const auto& c : components(graph)) {
        std::map<std::string, int> counts;
        int labeled = 0;
        for (const auto& m : c.members) {
            auto it = labels.find(m);
            if (it == labels.end()) continue;
            counts[it->second]++;
            labeled++;
        }
        if (labeled == 0) continue;
        int top = 0;
        for (const auto& [_, n] : counts) top = std::max(top, n);
        report.cluster_purity[c.cluster_id] = static_cast<double>(top) / labeled;
    }
    return report;
}

Difficulty parse_difficulty(const std::string& name) {
    if (name == "easy") return Difficulty::Easy;
    if (name == "medium") return Difficulty::Medium;
    if (name == "hard") return Difficulty::Hard;
    throw Error(ErrorCode::InvalidConfig, "difficulty must be easy|medium|hard");
}

namespace {

uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}
    uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        return mix64(state);
    }
    double uniform() { return (next() >> 11) * (1.0 / 9007199254740992.0); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

uint64_t hash_combine(uint64_t seed, const std::string& s, uint64_t extra) {
    uint64_t h = seed;
    for (unsigned char c : s) h = mix64(h ^ c);
    return mix64(h ^ extra);
}

struct Spot {
    double x, y, r, dark;
};

// one individual = a fixed set of dark spots over a lighter body ellipse
struct IndividualPattern {
    double body_a = 58.0;  // half axes in texture units
    double body_b = 36.0;
    std::vector<Spot> spots;

    static IndividualPattern make(Rng& rng) {
        IndividualPattern p;
        const int n = 42;
        for (int i = 0; i < n; i++) {
            Spot s;
            // rejection-free: sample in the ellipse via polar coordinates
            const double t = rng.uniform(0.0, 6.283185307179586);
            const double rad = std::sqrt(rng.uniform());
            s.x = p.body_a * 0.92 * rad * std::cos(t);
            s.y = p.body_b * 0.92 * rad * std::sin(t);
            s.r = rng.uniform(2.6, 5.2);
            s.dark = rng.uniform(0.45, 0.62);
            p.spots.push_back(s);
        }
        return p;
    }

    // luminance at body coordinates, or negative when outside the body
    double sample(double x, double y) const {
        const double e = (x * x) / (body_a * body_a) + (y * y) / (body_b * body_b);
        if (e > 1.0) return -1.0;
        double v = 0.78;
        // soft body edge
        if (e > 0.85) v -= 0.25 * (e - 0.85) / 0.15;
        for (const auto& s : spots) {
            const double d = std::hypot(x - s.x, y - s.y);
            if (d < s.r + 1.0) {
                const double fall = std::clamp(s.r + 1.0 - d, 0.0, 1.0);  // 1 px soft rim
                v -= s.dark * fall;
            }
        }
        return std::clamp(v, 0.02, 1.0);
    }
};

GrayImage make_background(Rng& rng, int w, int h) {
    GrayImage bg(w, h);
    const double base = rng.uniform(0.30, 0.45);
    const double gx = rng.uniform(-0.08, 0.08) / w;
    const double gy = rng.uniform(-0.08, 0.08) / h;
    for (int y = 0; y < h; y++)
        for (int x = 0; x < w; x++) bg.at(x, y) = static_cast<float>(base + gx * x + gy * y);

    // smooth large blobs
    for (int i = 0; i < 8; i++) {
        const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
        const double sg = rng.uniform(18, 45), amp = rng.uniform(-0.10, 0.10);
        for (int y = 0; y < h; y++)
            for (int x = 0; x < w; x++) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                bg.at(x, y) += static_cast<float>(amp * std::exp(-d2 / (2 * sg * sg)));
            }
    }
    // sharp fixed objects: these give the background its own stable keypoints
    for (int i = 0; i < 7; i++) {
        const double cx = rng.uniform(10, w - 10), cy = rng.uniform(10, h - 10);
        const double r = rng.uniform(3.0, 7.0);
        const double amp = (i % 2 == 0) ? rng.uniform(0.25, 0.40) : rng.uniform(-0.28, -0.18);
        for (int y = std::max(0, (int)(cy - r - 2)); y < std::min(h, (int)(cy + r + 3)); y++)
            for (int x = std::max(0, (int)(cx - r - 2)); x < std::min(w, (int)(cx + r + 3)); x++) {
                const double d = std::hypot(x - cx, y - cy);
                const double fall = std::clamp(r + 1.0 - d, 0.0, 1.0);
                bg.at(x, y) += static_cast<float>(amp * fall);
            }
    }
    for (auto& v : bg.pixels) v = std::clamp(v, 0.02f, 0.98f);
    return bg;
}

struct DifficultyParams {
    double noise = 0.0;
    double gain_lo = 1.0, gain_hi = 1.0;
    double max_rot_deg = 25.0;
};

DifficultyParams difficulty_params(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return {0.006, 0.95, 1.05, 15.0};
        case Difficulty::Medium: return {0.018, 0.85, 1.15, 25.0};
        case Difficulty::Hard: return {0.035, 0.70, 1.25, 25.0};
    }
    return {};
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, const std::string& out_dir) {
    if (spec.n_individuals < 1 || spec.videos_per_individual < 1 || spec.frames_per_video < 1)
        throw Error(ErrorCode::InvalidConfig, "all synthetic counts must be >= 1");

    fs::create_directories(out_dir);
    fs::create_directories(fs::path(out_dir) / "frames");

    const int total_videos = spec.n_individuals * spec.videos_per_individual;
    int n_locations = spec.n_camera_locations;
    if (n_locations <= 0) n_locations = std::max(2, total_videos / 3);
    n_locations = std::min(n_locations, total_videos);

    const DifficultyParams dp = difficulty_params(spec.difficulty);
    const int w = spec.frame_width, h = spec.frame_height;

    // individuals and backgrounds are functions of the run seed only
    std::vector<IndividualPattern> patterns;
    for (int i = 0; i < spec.n_individuals; i++) {
        Rng rng(hash_combine(spec.seed, "individual", static_cast<uint64_t>(i)));
        patterns.push_back(IndividualPattern::make(rng));
    }
    std::vector<GrayImage> backgrounds;
    for (int i = 0; i < n_locations; i++) {
        Rng rng(hash_combine(spec.seed, "background", static_cast<uint64_t>(i)));
        backgrounds.push_back(make_background(rng, w, h));
    }

    SyntheticDataset dataset;
    GroundTruthLabels labels;
    nlohmann::json manifest = nlohmann::json::array();

    int video_counter = 0;
    for (int ind = 0; ind < spec.n_individuals; ind++) {
        for (int v = 0; v < spec.videos_per_individual; v++, video_counter++) {
            char seq_buf[64];
            std::snprintf(seq_buf, sizeof(seq_buf), "ind%02d_v%02d", ind, v);
            const std::string seq_id = seq_buf;
            const int loc = video_counter % n_locations;
            const std::string loc_id = "cam" + std::to_string(loc);

            Rng vrng(hash_combine(spec.seed, seq_id, 0));
            const double rot = vrng.uniform(-dp.max_rot_deg, dp.max_rot_deg) * M_PI / 180.0;
            const double scale = vrng.uniform(0.7, 1.4);
            const double gain = vrng.uniform(dp.gain_lo, dp.gain_hi);
            const double bias = vrng.uniform(-0.03, 0.03);
            // body center path: start inside the frame, drift a few px/frame
            const double margin = 70.0 * scale;
            double cx = vrng.uniform(margin, w - margin);
            double cy = vrng.uniform(margin * 0.8, h - margin * 0.8);
            const double step = vrng.uniform(2.0, 4.0);
            const double dir = vrng.uniform(0.0, 2 * M_PI);
            const double vx = step * std::cos(dir), vy = step * std::sin(dir) * 0.5;

            const double cos_r = std::cos(rot), sin_r = std::sin(rot);
            const GrayImage& bg = backgrounds[loc];
            const IndividualPattern& pat = patterns[ind];

            const fs::path seq_dir = fs::path(out_dir) / "frames" / seq_id;
            fs::create_directories(seq_dir);

            for (int f = 0; f < spec.frames_per_video; f++) {
                GrayImage frame = bg;
                const double bx = cx + vx * f, by = cy + vy * f;
                // render the body: inverse-map frame pixels to body coordinates
                const double reach = 75.0 * scale;
                const int x0 = std::max(0, static_cast<int>(bx - reach));
                const int x1 = std::min(w, static_cast<int>(bx + reach) + 1);
                const int y0 = std::max(0, static_cast<int>(by - reach));
                const int y1 = std::min(h, static_cast<int>(by + reach) + 1);
                for (int y = y0; y < y1; y++) {
                    for (int x = x0; x < x1; x++) {
                        const double fx = (x - bx) / scale, fy = (y - by) / scale;
                        const double tx = fx * cos_r + fy * sin_r;
                        const double ty = -fx * sin_r + fy * cos_r;
                        const double v2 = pat.sample(tx, ty);
                        if (v2 >= 0.0) frame.at(x, y) = static_cast<float>(v2);
                    }
                }
                // illumination change + sensor noise, seeded per frame
                Rng frng(hash_combine(spec.seed, seq_id, 1000 + static_cast<uint64_t>(f)));
                for (auto& px : frame.pixels) {
                    double val = gain * px + bias;
                    val += dp.noise * (frng.uniform() + frng.uniform() - 1.0);
                    px = static_cast<float>(std::clamp(val, 0.0, 1.0));
                }
                char name[32];
                std::snprintf(name, sizeof(name), "f%04d.pgm", f);
                write_pgm(frame, (seq_dir / name).string());
            }

            manifest.push_back({{"sequence_id", seq_id},
                                {"camera_location_id", loc_id},
                                {"site_id", "synthetic"},
                                {"captured_at", nullptr},
                                {"frames_dir", seq_dir.string()},
                                {"frame_glob", "f*.pgm"}});
            labels[seq_id] = "individual_" + std::to_string(ind);
            dataset.sequence_ids.push_back(seq_id);
        }
    }

    dataset.manifest_path = (fs::path(out_dir) / "manifest.json").string();
    dataset.labels_path = (fs::path(out_dir) / "labels.csv").string();
    atomic_write(dataset.manifest_path, manifest.dump(2) + "\n");
    save_labels(labels, dataset.labels_path);
    return dataset;
}

std::vector<SweepRow> threshold_sweep(const std::vector<SimilarityRecord>& records,
                                      const GroundTruthLabels& labels,
                                      const std::vector<double>& thresholds,
                                      const std::vector<std::string>& all_nodes) {
    if (thresholds.size() < 2)
        throw Error(ErrorCode::InvalidConfig, "sweep needs >= 2 thresholds");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw Error(ErrorCode::InvalidConfig, "thresholds must be ascending");

    // true same-individual pairs among labeled sequences present in the records
    std::set<std::string> present(all_nodes.begin(), all_nodes.end());
    for (const auto& r : records) {
        present.insert(r.video_a);
        present.insert(r.video_b);
    }
    std::map<std::string, int> per_individual;
    for (const auto& seq : present) {
        auto it = labels.find(seq);
        if (it != labels.end()) per_individual[it->second]++;
    }
    long true_pairs = 0;
    for (const auto& [_, n] : per_individual) true_pairs += static_cast<long>(n) * (n - 1) / 2;

    std::vector<SweepRow> rows;
    for (double t : thresholds) {
        const ClusterGraph graph = build_clusters(records, t, all_nodes);
        const EvaluationReport rep = evaluate(graph, labels);
        SweepRow row;
        row.threshold = t;
        row.n_matches = static_cast<int>(graph.edges.size());
        row.success_rate = rep.success_rate;
        if (true_pairs > 0) row.recall = static_cast<double>(rep.n_correct) / true_pairs;
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "threshold,n_matches,success_rate,recall\n";
    for (const auto& r : rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.9g", r.threshold);
        out << buf << ',' << r.n_matches << ',';
        if (r.success_rate) {
            std::snprintf(buf, sizeof(buf), "%.6f", *r.success_rate);
            out << buf;
        } else {
            out << "null";
        }
        out << ',';
        if (r.recall) {
            std::snprintf(buf, sizeof(buf), "%.6f", *r.recall);
            out << buf;
        } else {
            out << "null";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace spotmatch
