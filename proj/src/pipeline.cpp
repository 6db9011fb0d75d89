#include "spotmatch/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "spotmatch/cluster.hpp"
#include "spotmatch/ingest.hpp"
#include "spotmatch/report.hpp"
#include "spotmatch/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spotmatch {

namespace {

uint64_t fnv1a(const std::string& data, uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t hash_file(const std::string& path, uint64_t h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return fnv1a("missing:" + path, h);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a(ss.str(), fnv1a(path, h));
}

std::string hex(uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json load_json(const std::string& path, ErrorCode code) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::StaleInputs, "missing " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(code, e.what());
    }
    return doc;
}

json sequences_to_json(const std::vector<VideoSequence>& sequences) {
    json arr = json::array();
    for (const auto& seq : sequences) {
        json js;
        js["sequence_id"] = seq.sequence_id;
        js["camera_location_id"] = seq.camera_location_id;
        js["site_id"] = seq.site_id;
        js["captured_at"] = seq.captured_at ? json(*seq.captured_at) : json(nullptr);
        js["frames"] = json::array();
        for (const auto& fr : seq.frames)
            js["frames"].push_back({{"frame_index", fr.frame_index},
                                    {"image_path", fr.image_path},
                                    {"width", fr.width},
                                    {"height", fr.height}});
        arr.push_back(std::move(js));
    }
    return json{{"format", "spotmatch-sequences"}, {"version", 1}, {"sequences", std::move(arr)}};
}

std::vector<VideoSequence> sequences_from_json(const json& doc) {
    std::vector<VideoSequence> out;
    for (const auto& js : doc.at("sequences")) {
        VideoSequence seq;
        seq.sequence_id = js.at("sequence_id").get<std::string>();
        seq.camera_location_id = js.at("camera_location_id").get<std::string>();
        seq.site_id = js.at("site_id").get<std::string>();
        if (!js.at("captured_at").is_null()) seq.captured_at = js["captured_at"].get<std::string>();
        for (const auto& jf : js.at("frames")) {
            FrameRef fr;
            fr.sequence_id = seq.sequence_id;
            fr.frame_index = jf.at("frame_index").get<int>();
            fr.image_path = jf.at("image_path").get<std::string>();
            fr.width = jf.at("width").get<int>();
            fr.height = jf.at("height").get<int>();
            seq.frames.push_back(std::move(fr));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

const char* source_name(DetectionSource s) {
    return s == DetectionSource::Imported ? "imported" : "motion";
}

json detections_to_json(const std::vector<Detection>& detections,
                        const std::vector<std::string>& empty_sequences) {
    json arr = json::array();
    std::map<std::string, std::map<int, int>> per_frame;
    for (const auto& d : detections) {
        arr.push_back({{"sequence_id", d.frame.sequence_id},
                       {"frame_index", d.frame.frame_index},
                       {"x", d.bbox.x},
                       {"y", d.bbox.y},
                       {"w", d.bbox.w},
                       {"h", d.bbox.h},
                       {"confidence", d.confidence},
                       {"source", source_name(d.source)}});
        per_frame[d.frame.sequence_id][d.frame.frame_index]++;
    }
    json multi = json::object();
    for (const auto& [seq, frames] : per_frame)
        for (const auto& [_, n] : frames)
            if (n > 1) multi[seq] = true;
    return json{{"format", "spotmatch-detections"},
                {"version", 1},
                {"detections", std::move(arr)},
                {"empty_sequences", empty_sequences},
                {"multi_detection", std::move(multi)}};
}

std::vector<Detection> detections_from_json(const json& doc,
                                            const std::vector<VideoSequence>& sequences) {
    std::map<std::pair<std::string, int>, const FrameRef*> frames;
    for (const auto& seq : sequences)
        for (const auto& fr : seq.frames) frames[{fr.sequence_id, fr.frame_index}] = &fr;

    std::vector<Detection> out;
    for (const auto& jd : doc.at("detections")) {
        Detection d;
        const std::string seq = jd.at("sequence_id").get<std::string>();
        const int frame = jd.at("frame_index").get<int>();
        auto it = frames.find({seq, frame});
        if (it == frames.end()) continue;
        d.frame = *it->second;
        d.bbox = {jd.at("x").get<int>(), jd.at("y").get<int>(), jd.at("w").get<int>(),
                  jd.at("h").get<int>()};
        d.confidence = jd.at("confidence").get<double>();
        d.source = jd.at("source").get<std::string>() == "imported" ? DetectionSource::Imported
                                                                    : DetectionSource::Motion;
        out.push_back(std::move(d));
    }
    return out;
}

// species-classification hook: pass-through unless a per-frame label file
// and a species of interest are configured
std::vector<Detection> apply_species_filter(std::vector<Detection> detections,
                                            const RunConfig& cfg) {
    if (cfg.species_labels_path.empty() || cfg.species_of_interest.empty())
        return detections;
    const json doc = load_json(cfg.species_labels_path, ErrorCode::Parse);
    std::vector<Detection> out;
    for (auto& d : detections) {
        const std::string key =
            d.frame.sequence_id + "/" + std::to_string(d.frame.frame_index);
        auto it = doc.find(key);
        // unlabeled frames pass; only a conflicting label filters
        if (it != doc.end() && it->get<std::string>() != cfg.species_of_interest) continue;
        out.push_back(std::move(d));
    }
    return out;
}

struct StageState {
    std::map<std::string, std::string> hashes;

    static StageState load(const std::string& path) {
        StageState s;
        std::ifstream in(path);
        if (!in) return s;
        json doc;
        try {
            in >> doc;
        } catch (const json::exception&) {
            return s;
        }
        for (auto it = doc.begin(); it != doc.end(); ++it)
            s.hashes[it.key()] = it.value().get<std::string>();
        return s;
    }

    void save(const std::string& path) const {
        json doc = json::object();
        for (const auto& [k, v] : hashes) doc[k] = v;
        atomic_write(path, doc.dump(2) + "\n");
    }
};

struct PipelineContext {
    RunConfig cfg;
    RunPaths paths;
};

std::string sift_config_fingerprint(const SiftConfig& s) {
    std::ostringstream ss;
    ss << s.sigma0 << '|' << s.intervals << '|' << s.n_octaves << '|' << s.assumed_blur << '|'
       << s.contrast_threshold << '|' << s.edge_ratio << '|' << s.max_refine_iters << '|'
       << s.orientation_bins << '|' << s.peak_ratio << '|' << s.crop_margin << '|'
       << s.max_features;
    return ss.str();
}

uint64_t stage_input_hash(const PipelineContext& ctx, const std::string& stage) {
    const RunConfig& cfg = ctx.cfg;
    uint64_t h = fnv1a("stage:" + stage);
    if (stage == "ingest") {
        h = hash_file(cfg.input_manifest, h);
        h = fnv1a(std::to_string(cfg.frames_per_video), h);
    } else if (stage == "detect") {
        h = hash_file(ctx.paths.sequences, h);
        std::ostringstream ss;
        ss << cfg.detections_path << '|' << cfg.min_confidence << '|' << cfg.diff_threshold << '|'
           << cfg.min_area << '|' << cfg.background_cap << '|' << cfg.species_labels_path << '|'
           << cfg.species_of_interest;
        h = fnv1a(ss.str(), h);
        if (!cfg.detections_path.empty()) h = hash_file(cfg.detections_path, h);
    } else if (stage == "extract") {
        h = hash_file(ctx.paths.sequences, h);
        h = hash_file(ctx.paths.detections, h);
        h = fnv1a(sift_config_fingerprint(cfg.sift), h);
        h = fnv1a(cfg.crop_to_detection ? "crop" : "full", h);
    } else if (stage == "match") {
        h = hash_file(ctx.paths.features, h);
        h = fnv1a(std::to_string(cfg.ratio), h);
    } else if (stage == "cluster") {
        h = hash_file(ctx.paths.similarities, h);
        h = fnv1a(std::to_string(cfg.threshold), h);
    } else if (stage == "report") {
        h = hash_file(ctx.paths.clusters, h);
        h = hash_file(ctx.paths.similarities, h);
        h = fnv1a(cfg.thumbnails ? "thumbs" : "plain", h);
    }
    return h;
}

void require(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw Error(ErrorCode::StaleInputs, path + " missing; run the " + producer + " stage first");
}

// ---- stage bodies ----

void stage_ingest(const PipelineContext& ctx) {
    auto sequences = load_manifest(ctx.cfg.input_manifest);
    for (auto& seq : sequences) {
        const int stride = stride_for_target(static_cast<int>(seq.frames.size()),
                                             ctx.cfg.frames_per_video);
        seq.frames = sample_frames(seq, stride, ctx.cfg.frames_per_video);
    }
    atomic_write(ctx.paths.sequences, sequences_to_json(sequences).dump(2) + "\n");
}

void stage_detect(const PipelineContext& ctx) {
    require(ctx.paths.sequences, "ingest");
    const auto sequences = sequences_from_json(load_json(ctx.paths.sequences, ErrorCode::Parse));

    std::vector<Detection> detections;
    if (!ctx.cfg.detections_path.empty()) {
        detections =
            import_detections(ctx.cfg.detections_path, sequences, ctx.cfg.min_confidence);
    } else {
        // group sampled frames by camera for the median background
        std::map<std::string, std::vector<const FrameRef*>> by_camera;
        for (const auto& seq : sequences)
            for (const auto& fr : seq.frames) by_camera[seq.camera_location_id].push_back(&fr);

        for (const auto& [camera, frames] : by_camera) {
            std::vector<const FrameRef*> chosen;
            if (static_cast<int>(frames.size()) <= ctx.cfg.background_cap) {
                chosen = frames;
            } else {
                // evenly spaced subset, capped
                for (int i = 0; i < ctx.cfg.background_cap; i++)
                    chosen.push_back(frames[i * frames.size() / ctx.cfg.background_cap]);
            }
            std::vector<GrayImage> images;
            images.reserve(chosen.size());
            for (const auto* fr : chosen) images.push_back(decode_image(fr->image_path));

            if (images.size() < 3) {
                // not enough footage for a median model; keep the full frame
                for (const auto* fr : frames) {
                    Detection d;
                    d.frame = *fr;
                    d.bbox = {0, 0, fr->width, fr->height};
                    d.confidence = 0.5;
                    d.source = DetectionSource::Motion;
                    detections.push_back(std::move(d));
                }
                continue;
            }
            const BackgroundModel bg = build_background(images, camera);
            for (const auto* fr : frames) {
                const GrayImage frame = decode_image(fr->image_path);
                auto dets = detect_motion(frame, *fr, bg, ctx.cfg.diff_threshold, ctx.cfg.min_area);
                detections.insert(detections.end(), dets.begin(), dets.end());
            }
        }
    }

    detections = apply_species_filter(std::move(detections), ctx.cfg);
    const FilterResult filtered = filter_empty(sequences, detections);
    atomic_write(ctx.paths.detections,
                 detections_to_json(detections, filtered.empty).dump(2) + "\n");
}

void stage_extract(const PipelineContext& ctx) {
    require(ctx.paths.sequences, "ingest");
    require(ctx.paths.detections, "detect");
    const auto sequences = sequences_from_json(load_json(ctx.paths.sequences, ErrorCode::Parse));
    const auto detections =
        detections_from_json(load_json(ctx.paths.detections, ErrorCode::Parse), sequences);

    // one task per (frame, detection); full-frame region when cropping is off
    struct Task {
        FrameRef frame;
        Detection det;
        int det_index;
    };
    std::map<std::pair<std::string, int>, int> per_frame_counter;
    std::vector<Task> tasks;
    for (const auto& d : detections) {
        Task t;
        t.frame = d.frame;
        t.det = d;
        if (!ctx.cfg.crop_to_detection)
            t.det.bbox = {0, 0, d.frame.width, d.frame.height};
        t.det_index = per_frame_counter[{d.frame.sequence_id, d.frame.frame_index}]++;
        if (!ctx.cfg.crop_to_detection && t.det_index > 0)
            continue;  // full frame once per frame
        tasks.push_back(std::move(t));
    }

    std::vector<FeatureStoreEntry> results(tasks.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            const Task& t = tasks[k];
            const GrayImage frame = decode_image(t.frame.image_path);
            const auto features = extract(frame, t.det, t.det_index, ctx.cfg.sift);
            FeatureStoreEntry entry;
            entry.key = {t.frame.sequence_id, t.frame.frame_index, t.det_index};
            for (const auto& f : features) {
                entry.keypoints.push_back(f.keypoint);
                entry.descriptors.push_back(f.descriptor);
            }
            results[k] = std::move(entry);
        }
    };
    const int workers = std::max(1, ctx.cfg.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; t++) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    FeatureStore store;
    for (auto& entry : results)
        if (!entry.key.sequence_id.empty()) store.put(std::move(entry));
    store.save(ctx.paths.features);
}

std::vector<VideoFeatures> collect_video_features(const FeatureStore& store,
                                                  const std::vector<VideoSequence>& sequences) {
    std::map<std::string, const VideoSequence*> by_id;
    for (const auto& seq : sequences) by_id[seq.sequence_id] = &seq;

    std::map<std::string, std::map<int, std::vector<Descriptor>>> grouped;
    for (const auto& [key, entry] : store.entries()) {
        auto& frame = grouped[key.sequence_id][key.frame_index];
        frame.insert(frame.end(), entry.descriptors.begin(), entry.descriptors.end());
    }

    std::vector<VideoFeatures> out;
    for (const auto& [seq_id, frames] : grouped) {
        VideoFeatures vf;
        vf.sequence_id = seq_id;
        auto it = by_id.find(seq_id);
        if (it != by_id.end()) vf.camera_location_id = it->second->camera_location_id;
        for (const auto& [idx, descs] : frames) {
            vf.frame_indices.push_back(idx);
            vf.frames.push_back(descs);
        }
        out.push_back(std::move(vf));
    }
    return out;
}

void stage_match(const PipelineContext& ctx) {
    require(ctx.paths.sequences, "ingest");
    require(ctx.paths.features, "extract");
    const auto sequences = sequences_from_json(load_json(ctx.paths.sequences, ErrorCode::Parse));
    const FeatureStore store = FeatureStore::load(ctx.paths.features);
    const auto videos = collect_video_features(store, sequences);

    MatchConfig mcfg;
    mcfg.ratio = ctx.cfg.ratio;
    const auto records = score_all(videos, mcfg, ctx.cfg.workers);
    save_similarities(records, ctx.paths.similarities);
}

void stage_cluster(const PipelineContext& ctx) {
    require(ctx.paths.similarities, "match");
    const auto records = load_similarities(ctx.paths.similarities);
    std::set<std::string> nodes;
    for (const auto& r : records) {
        nodes.insert(r.video_a);
        nodes.insert(r.video_b);
    }
    const ClusterGraph graph = build_clusters(
        records, ctx.cfg.threshold, std::vector<std::string>(nodes.begin(), nodes.end()));
    save_clusters(graph, ctx.paths.clusters);
}

void stage_report(const PipelineContext& ctx) {
    require(ctx.paths.clusters, "cluster");
    require(ctx.paths.similarities, "match");
    const ClusterGraph graph = load_clusters(ctx.paths.clusters);
    const auto records = load_similarities(ctx.paths.similarities);

    ReportMetadata meta;
    if (fs::exists(ctx.paths.sequences)) {
        const auto sequences =
            sequences_from_json(load_json(ctx.paths.sequences, ErrorCode::Parse));
        for (const auto& seq : sequences)
            meta.camera_location[seq.sequence_id] = seq.camera_location_id;
    }
    std::map<std::string, std::string> thumbnails;
    if (fs::exists(ctx.paths.detections)) {
        const json ddoc = load_json(ctx.paths.detections, ErrorCode::Parse);
        for (auto it = ddoc.at("multi_detection").begin(); it != ddoc["multi_detection"].end(); ++it)
            meta.multi_detection[it.key()] = it.value().get<bool>();

        if (ctx.cfg.thumbnails && fs::exists(ctx.paths.sequences)) {
            const auto sequences =
                sequences_from_json(load_json(ctx.paths.sequences, ErrorCode::Parse));
            const auto detections = detections_from_json(ddoc, sequences);
            std::map<std::string, const Detection*> first_det;
            for (const auto& d : detections) {
                auto [it2, inserted] = first_det.emplace(d.frame.sequence_id, &d);
                if (!inserted && std::tie(d.frame.frame_index, d.bbox.x) <
                                     std::tie(it2->second->frame.frame_index, it2->second->bbox.x))
                    it2->second = &d;
            }
            for (const auto& [seq_id, det] : first_det) {
                try {
                    const GrayImage frame = decode_image(det->frame.image_path);
                    const BBox box = padded_crop_box(det->bbox, frame.width, frame.height, 0.1);
                    GrayImage crop(box.w, box.h);
                    for (int y = 0; y < box.h; y++)
                        for (int x = 0; x < box.w; x++)
                            crop.at(x, y) = frame.at(box.x + x, box.y + y);
                    const int tw = std::min(128, crop.width);
                    const int th = std::max(1, crop.height * tw / std::max(1, crop.width));
                    thumbnails[seq_id] = encode_png_base64(resize_nearest(crop, tw, th));
                } catch (const Error&) {
                    // thumbnails are cosmetic; skip on any decode problem
                }
            }
        }
    }

    const GraphLayout layout = layout_graph(graph, ctx.cfg.seed);
    atomic_write(ctx.paths.report_html, render_html(graph, layout, meta, thumbnails));
    const TableExports tables = export_tables(graph, records);
    atomic_write(ctx.paths.membership_csv, tables.membership_csv);
    atomic_write(ctx.paths.pairs_csv, tables.pairs_csv);
}

void stage_evaluate(const PipelineContext& ctx) {
    require(ctx.paths.clusters, "cluster");
    if (ctx.cfg.labels_path.empty())
        throw Error(ErrorCode::InvalidConfig, "evaluate needs --labels");
    const ClusterGraph graph = load_clusters(ctx.paths.clusters);
    const GroundTruthLabels labels = load_labels(ctx.cfg.labels_path);
    const EvaluationReport rep = evaluate(graph, labels);

    json doc;
    doc["n_matches"] = rep.n_matches;
    doc["n_correct"] = rep.n_correct;
    doc["n_unverifiable"] = rep.n_unverifiable;
    doc["success_rate"] = rep.success_rate ? json(*rep.success_rate) : json(nullptr);
    doc["cluster_purity"] = rep.cluster_purity;
    atomic_write(ctx.paths.evaluation, doc.dump(2) + "\n");
}

std::string stage_output(const PipelineContext& ctx, const std::string& stage) {
    if (stage == "ingest") return ctx.paths.sequences;
    if (stage == "detect") return ctx.paths.detections;
    if (stage == "extract") return ctx.paths.features;
    if (stage == "match") return ctx.paths.similarities;
    if (stage == "cluster") return ctx.paths.clusters;
    if (stage == "report") return ctx.paths.report_html;
    return {};
}

void dispatch(const PipelineContext& ctx, const std::string& stage) {
    if (stage == "ingest") stage_ingest(ctx);
    else if (stage == "detect") stage_detect(ctx);
    else if (stage == "extract") stage_extract(ctx);
    else if (stage == "match") stage_match(ctx);
    else if (stage == "cluster") stage_cluster(ctx);
    else if (stage == "report") stage_report(ctx);
    else if (stage == "evaluate") stage_evaluate(ctx);
    else throw Error(ErrorCode::UnknownStage, stage);
}

}  // namespace

RunPaths run_paths(const std::string& out_dir) {
    RunPaths p;
    const fs::path d(out_dir);
    p.config = (d / "run_config.json").string();
    p.sequences = (d / "sequences.json").string();
    p.detections = (d / "detections.json").string();
    p.features = (d / "features.bin").string();
    p.similarities = (d / "similarities.csv").string();
    p.clusters = (d / "clusters.json").string();
    p.report_html = (d / "report.html").string();
    p.membership_csv = (d / "membership.csv").string();
    p.pairs_csv = (d / "pairs.csv").string();
    p.evaluation = (d / "evaluation.json").string();
    p.stage_state = (d / "stage_state.json").string();
    return p;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    RunConfig cfg;
    try {
        cfg.input_manifest = doc.value("input_manifest", cfg.input_manifest);
        cfg.detections_path = doc.value("detections_path", cfg.detections_path);
        cfg.labels_path = doc.value("labels_path", cfg.labels_path);
        cfg.out_dir = doc.value("out_dir", cfg.out_dir);
        cfg.seed = doc.value("seed", cfg.seed);
        cfg.workers = doc.value("workers", cfg.workers);
        cfg.frames_per_video = doc.value("frames_per_video", cfg.frames_per_video);
        cfg.min_confidence = doc.value("min_confidence", cfg.min_confidence);
        cfg.diff_threshold = doc.value("diff_threshold", cfg.diff_threshold);
        cfg.min_area = doc.value("min_area", cfg.min_area);
        cfg.background_cap = doc.value("background_cap", cfg.background_cap);
        cfg.crop_to_detection = doc.value("crop_to_detection", cfg.crop_to_detection);
        cfg.species_labels_path = doc.value("species_labels_path", cfg.species_labels_path);
        cfg.species_of_interest = doc.value("species_of_interest", cfg.species_of_interest);
        cfg.ratio = doc.value("ratio", cfg.ratio);
        cfg.threshold = doc.value("threshold", cfg.threshold);
        cfg.thumbnails = doc.value("thumbnails", cfg.thumbnails);
        if (doc.contains("sift")) {
            const json& s = doc["sift"];
            cfg.sift.sigma0 = s.value("sigma0", cfg.sift.sigma0);
            cfg.sift.intervals = s.value("intervals", cfg.sift.intervals);
            cfg.sift.n_octaves = s.value("n_octaves", cfg.sift.n_octaves);
            cfg.sift.assumed_blur = s.value("assumed_blur", cfg.sift.assumed_blur);
            cfg.sift.contrast_threshold = s.value("contrast_threshold", cfg.sift.contrast_threshold);
            cfg.sift.edge_ratio = s.value("edge_ratio", cfg.sift.edge_ratio);
            cfg.sift.max_refine_iters = s.value("max_refine_iters", cfg.sift.max_refine_iters);
            cfg.sift.orientation_bins = s.value("orientation_bins", cfg.sift.orientation_bins);
            cfg.sift.peak_ratio = s.value("peak_ratio", cfg.sift.peak_ratio);
            cfg.sift.crop_margin = s.value("crop_margin", cfg.sift.crop_margin);
            cfg.sift.max_features = s.value("max_features", cfg.sift.max_features);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    json doc;
    doc["input_manifest"] = cfg.input_manifest;
    doc["detections_path"] = cfg.detections_path;
    doc["labels_path"] = cfg.labels_path;
    doc["out_dir"] = cfg.out_dir;
    doc["seed"] = cfg.seed;
    doc["workers"] = cfg.workers;
    doc["frames_per_video"] = cfg.frames_per_video;
    doc["min_confidence"] = cfg.min_confidence;
    doc["diff_threshold"] = cfg.diff_threshold;
    doc["min_area"] = cfg.min_area;
    doc["background_cap"] = cfg.background_cap;
    doc["crop_to_detection"] = cfg.crop_to_detection;
    doc["species_labels_path"] = cfg.species_labels_path;
    doc["species_of_interest"] = cfg.species_of_interest;
    doc["ratio"] = cfg.ratio;
    doc["threshold"] = cfg.threshold;
    doc["thumbnails"] = cfg.thumbnails;
    doc["sift"] = {{"sigma0", cfg.sift.sigma0},
                   {"intervals", cfg.sift.intervals},
                   {"n_octaves", cfg.sift.n_octaves},
                   {"assumed_blur", cfg.sift.assumed_blur},
                   {"contrast_threshold", cfg.sift.contrast_threshold},
                   {"edge_ratio", cfg.sift.edge_ratio},
                   {"max_refine_iters", cfg.sift.max_refine_iters},
                   {"orientation_bins", cfg.sift.orientation_bins},
                   {"peak_ratio", cfg.sift.peak_ratio},
                   {"crop_margin", cfg.sift.crop_margin},
                   {"max_features", cfg.sift.max_features}};
    atomic_write(path, doc.dump(2) + "\n");
}

void apply_env_overrides(RunConfig& cfg) {
    auto get = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = get("SPOTMATCH_THRESHOLD")) cfg.threshold = std::stod(*v);
    if (auto v = get("SPOTMATCH_RATIO")) cfg.ratio = std::stod(*v);
    if (auto v = get("SPOTMATCH_WORKERS")) cfg.workers = std::stoi(*v);
    if (auto v = get("SPOTMATCH_SEED")) cfg.seed = std::stoull(*v);
    if (auto v = get("SPOTMATCH_OUT_DIR")) cfg.out_dir = *v;
    if (auto v = get("SPOTMATCH_MANIFEST")) cfg.input_manifest = *v;
    if (auto v = get("SPOTMATCH_LABELS")) cfg.labels_path = *v;
}

std::vector<StageResult> run_pipeline(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    PipelineContext ctx{cfg, run_paths(cfg.out_dir)};
    save_run_config(cfg, ctx.paths.config);

    StageState state = StageState::load(ctx.paths.stage_state);
    std::vector<StageResult> results;
    bool upstream_ran = false;
    for (const auto& stage : pipeline_stages()) {
        const std::string h = hex(stage_input_hash(ctx, stage));
        const std::string out = stage_output(ctx, stage);
        auto it = state.hashes.find(stage);
        const bool cached =
            !upstream_ran && it != state.hashes.end() && it->second == h && fs::exists(out);
        if (!cached) {
            dispatch(ctx, stage);
            // hash again: upstream outputs may have changed before this stage ran
            state.hashes[stage] = hex(stage_input_hash(ctx, stage));
            state.save(ctx.paths.stage_state);
            upstream_ran = true;
        }
        results.push_back({stage, cached});
    }
    return results;
}

void run_stage(const RunConfig& cfg, const std::string& stage) {
    fs::create_directories(cfg.out_dir);
    PipelineContext ctx{cfg, run_paths(cfg.out_dir)};
    dispatch(ctx, stage);
    if (stage != "evaluate") {
        StageState state = StageState::load(ctx.paths.stage_state);
        state.hashes[stage] = hex(stage_input_hash(ctx, stage));
        state.save(ctx.paths.stage_state);
    }
    save_run_config(cfg, ctx.paths.config);
}

}  // namespace spotmatch
