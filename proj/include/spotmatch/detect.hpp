#pragma once

#include <string>
#include <vector>

#include "spotmatch/core.hpp"

namespace spotmatch {

enum class DetectionSource { Imported, Motion };

struct BBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool operator==(const BBox&) const = default;
};

struct Detection {
    FrameRef frame;
    BBox bbox;
    double confidence = 0.0;
    DetectionSource source = DetectionSource::Motion;
};

/// Per-camera temporal-median background; valid for one frame geometry.
struct BackgroundModel {
    std::string camera_location_id;
    GrayImage median_image;
    int n_source_frames = 0;
};

struct ImportStats {
    int imported = 0;
    int dropped_low_confidence = 0;
    int dropped_unknown_frame = 0;
    int dropped_category = 0;
};

/// Read externally produced detections (normalized bboxes keyed by
/// "<sequence_id>/<frame_index>") and map them onto known frames.
std::vector<Detection> import_detections(const std::string& detections_path,
                                         const std::vector<VideoSequence>& sequences,
                                         double min_confidence,
                                         const std::vector<std::string>& accept_categories = {"animal", "1"},
                                         ImportStats* stats = nullptr);

BackgroundModel build_background(const std::vector<GrayImage>& frames,
                                 const std::string& camera_location_id);

/// Threshold |frame - median|, 8-connected components, tight bbox per
/// component of area >= min_area. Confidence = mean abs difference inside
/// the component, clamped to [0, 1].
std::vector<Detection> detect_motion(const GrayImage& frame, const FrameRef& ref,
                                     const BackgroundModel& bg, double diff_threshold,
                                     int min_area);

struct FilterResult {
    std::vector<VideoSequence> kept;  // frames reduced to detected ones
    std::vector<std::string> empty;   // sequence ids with no detection anywhere
};

FilterResult filter_empty(const std::vector<VideoSequence>& sequences,
                          const std::vector<Detection>& detections);

}  // namespace spotmatch
