#include "spotmatch/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

namespace spotmatch {

std::vector<Detection> import_detections(const std::string& detections_path,
                                         const std::vector<VideoSequence>& sequences,
                                         double min_confidence,
                                         const std::vector<std::string>& accept_categories,
                                         ImportStats* stats) {
    if (min_confidence < 0.0 || min_confidence > 1.0)
        throw Error(ErrorCode::InvalidConfig, "min_confidence must be in [0,1]");

    std::ifstream in(detections_path);
    if (!in) throw Error(ErrorCode::DetectionParse, "cannot open " + detections_path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::DetectionParse, e.what());
    }
    if (!doc.is_array()) throw Error(ErrorCode::DetectionParse, "top level must be an array");

    std::map<std::string, const FrameRef*> frame_by_id;
    for (const auto& seq : sequences)
        for (const auto& fr : seq.frames)
            frame_by_id[fr.sequence_id + "/" + std::to_string(fr.frame_index)] = &fr;

    ImportStats local;
    std::vector<Detection> out;
    for (const auto& entry : doc) {
        std::string image_id;
        try {
            image_id = entry.at("image_id").get<std::string>();
            for (const auto& det : entry.at("detections")) {
                std::string category = det.at("category").get<std::string>();
                double conf = det.at("conf").get<double>();
                auto bbox = det.at("bbox");
                if (!bbox.is_array() || bbox.size() != 4)
                    throw Error(ErrorCode::DetectionParse, "bbox must have 4 entries");

                if (!accept_categories.empty() &&
                    std::find(accept_categories.begin(), accept_categories.end(), category) ==
                        accept_categories.end()) {
                    local.dropped_category++;
                    continue;
                }
                if (conf < min_confidence) {
                    local.dropped_low_confidence++;
                    continue;
                }
                auto it = frame_by_id.find(image_id);
                if (it == frame_by_id.end()) {
                    local.dropped_unknown_frame++;
                    continue;
                }
                const FrameRef& fr = *it->second;
                Detection d;
                d.frame = fr;
                d.confidence = conf;
                d.source = DetectionSource::Imported;
                double xn = bbox[0].get<double>(), yn = bbox[1].get<double>();
                double wn = bbox[2].get<double>(), hn = bbox[3].get<double>();
                d.bbox.x = std::clamp(static_cast<int>(std::lround(xn * fr.width)), 0, fr.width - 1);
                d.bbox.y = std::clamp(static_cast<int>(std::lround(yn * fr.height)), 0, fr.height - 1);
                d.bbox.w = std::clamp(static_cast<int>(std::lround(wn * fr.width)), 1, fr.width - d.bbox.x);
                d.bbox.h = std::clamp(static_cast<int>(std::lround(hn * fr.height)), 1, fr.height - d.bbox.y);
                local.imported++;
                out.push_back(std::move(d));
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::DetectionParse, std::string(e.what()) + " at " + image_id);
        }
    }
    if (stats) *stats = local;
    if (out.empty()) throw Error(ErrorCode::NoFramesMatched, detections_path);
    return out;
}

BackgroundModel build_background(const std::vector<GrayImage>& frames,
                                 const std::string& camera_location_id) {
    if (frames.size() < 3)
        throw Error(ErrorCode::InsufficientFrames, "background needs >= 3 frames");
    const int w = frames[0].width, h = frames[0].height;
    for (const auto& f : frames)
        if (f.width != w || f.height != h)
            throw Error(ErrorCode::DimensionMismatch, "background frames differ in size");

    BackgroundModel bg;
    bg.camera_location_id = camera_location_id;
    bg.n_source_frames = static_cast<int>(frames.size());
    bg.median_image = GrayImage(w, h);

    std::vector<float> column(frames.size());
    const size_t n = static_cast<size_t>(w) * h;
    for (size_t i = 0; i < n; i++) {
        for (size_t k = 0; k < frames.size(); k++) column[k] = frames[k].pixels[i];
        size_t mid = column.size() / 2;
        std::nth_element(column.begin(), column.begin() + mid, column.end());
        float med = column[mid];
        if (column.size() % 2 == 0) {
            float lo = *std::max_element(column.begin(), column.begin() + mid);
            med = 0.5f * (lo + med);
        }
        bg.median_image.pixels[i] = med;
    }
    return bg;
}

std::vector<Detection> detect_motion(const GrayImage& frame, const FrameRef& ref,
                                     const BackgroundModel& bg, double diff_threshold,
                                     int min_area) {
    const int w = frame.width, h = frame.height;
    if (w != bg.median_image.width || h != bg.median_image.height)
        throw Error(ErrorCode::DimensionMismatch, "frame/background size mismatch");
    if (min_area < 1) throw Error(ErrorCode::InvalidConfig, "min_area must be >= 1");

    const size_t n = static_cast<size_t>(w) * h;
    std::vector<float> diff(n);
    std::vector<int> label(n, -1);
    for (size_t i = 0; i < n; i++)
        diff[i] = std::fabs(frame.pixels[i] - bg.median_image.pixels[i]);

    struct Component {
        int min_x, min_y, max_x, max_y;
        long area;
        double sum_diff;
    };
    std::vector<Component> comps;
    std::vector<size_t> stack;

    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            size_t idx = static_cast<size_t>(y) * w + x;
            if (label[idx] >= 0 || diff[idx] <= diff_threshold) continue;
            int id = static_cast<int>(comps.size());
            comps.push_back({x, y, x, y, 0, 0.0});
            label[idx] = id;
            stack.clear();
            stack.push_back(idx);
            while (!stack.empty()) {
                size_t cur = stack.back();
                stack.pop_back();
                int cx = static_cast<int>(cur % w), cy = static_cast<int>(cur / w);
                Component& c = comps[id];
                c.area++;
                c.sum_diff += diff[cur];
                c.min_x = std::min(c.min_x, cx);
                c.max_x = std::max(c.max_x, cx);
                c.min_y = std::min(c.min_y, cy);
                c.max_y = std::max(c.max_y, cy);
                for (int dy = -1; dy <= 1; dy++) {
                    for (int dx = -1; dx <= 1; dx++) {
                        if (dx == 0 && dy == 0) continue;
                        int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        size_t ni = static_cast<size_t>(ny) * w + nx;
                        if (label[ni] < 0 && diff[ni] > diff_threshold) {
                            label[ni] = id;
                            stack.push_back(ni);
                        }
                    }
                }
            }
        }
    }

    std::vector<Detection> out;
    for (const auto& c : comps) {
        if (c.area < min_area) continue;
        Detection d;
        d.frame = ref;
        d.bbox = {c.min_x, c.min_y, c.max_x - c.min_x + 1, c.max_y - c.min_y + 1};
        d.confidence = std::clamp(c.sum_diff / static_cast<double>(c.area), 0.0, 1.0);
        d.source = DetectionSource::Motion;
        out.push_back(std::move(d));
    }
    return out;
}

FilterResult filter_empty(const std::vector<VideoSequence>& sequences,
                          const std::vector<Detection>& detections) {
    std::map<std::string, std::vector<int>> detected_frames;
    for (const auto& d : detections)
        detected_frames[d.frame.sequence_id].push_back(d.frame.frame_index);
    for (auto& [_, idx] : detected_frames) std::sort(idx.begin(), idx.end());

    FilterResult result;
    for (const auto& seq : sequences) {
        VideoSequence kept = seq;
        kept.frames.clear();
        auto it = detected_frames.find(seq.sequence_id);
        for (const auto& fr : seq.frames) {
            if (it != detected_frames.end() &&
                std::binary_search(it->second.begin(), it->second.end(), fr.frame_index))
                kept.frames.push_back(fr);
        }
        if (kept.frames.empty())
            result.empty.push_back(seq.sequence_id);
        else
            result.kept.push_back(std::move(kept));
    }
    return result;
}

}  // namespace spotmatch
