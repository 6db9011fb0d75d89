#pragma once

#include <array>
#include <optional>
#include <vector>

#include "spotmatch/core.hpp"
#include "spotmatch/detect.hpp"

namespace spotmatch {

struct SiftConfig {
    double sigma0 = 1.6;          // blur of level 0 relative to octave sampling
    int intervals = 3;            // s; levels per octave = s + 3
    int n_octaves = 0;            // 0 = auto: floor(log2(min(W,H))) - 2
    double assumed_blur = 0.5;    // blur already present in the raw image
    double contrast_threshold = 0.03;  // applied as contrast_threshold / intervals
    double edge_ratio = 10.0;
    int max_refine_iters = 5;
    int orientation_bins = 36;
    double peak_ratio = 0.8;
    double crop_margin = 0.10;    // bbox padding fraction per side
    int max_features = 500;       // keep strongest by response; 0 = unlimited
};

struct ScaleSpacePyramid {
    std::vector<std::vector<GrayImage>> octaves;  // [octave][level], level count = s + 3
    double sigma0 = 1.6;
    int intervals = 3;
};

struct DoGPyramid {
    std::vector<std::vector<GrayImage>> octaves;  // [octave][level], level count = s + 2
};

struct Keypoint {
    double x = 0.0;           // original-image coordinates
    double y = 0.0;
    double scale = 0.0;       // blur sigma in original-image pixels
    double orientation = 0.0; // radians in [0, 2pi)
    double response = 0.0;    // |DoG| at the refined extremum
    double level = 0.0;       // interpolated DoG level within the octave
    int octave = 0;
    int detection_index = 0;
};

using Descriptor = std::array<float, 128>;

struct CandidateExtremum {
    int octave;
    int level;  // DoG level, 1 .. s
    int row;
    int col;

    bool operator==(const CandidateExtremum&) const = default;
};

enum class RejectReason {
    LowContrast,
    EdgeLike,
    SingularHessian,
    DivergedRefinement,
    OutOfBounds,
    DegenerateGradient,
    WindowOutOfBounds,
    DegenerateDescriptor,
};

/// Separable Gaussian blur, kernel radius ceil(4*sigma), reflected borders.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

ScaleSpacePyramid build_gaussian_pyramid(const GrayImage& img, const SiftConfig& cfg);
DoGPyramid build_dog_pyramid(const ScaleSpacePyramid& p);

/// 26-neighbor strict extrema with |value| > contrast_floor. First/last DoG
/// levels and 1-pixel borders are excluded.
std::vector<CandidateExtremum> detect_candidates(const DoGPyramid& d, double contrast_floor);

struct RefinedKeypoint {
    Keypoint kp;       // position/scale in original-image coordinates
    double off_row;    // final subpixel offsets on the octave grid
    double off_col;
    double off_level;
    int grid_row;
    int grid_col;
    int grid_level;
};

std::optional<RefinedKeypoint> refine_and_filter(const CandidateExtremum& cand,
                                                 const DoGPyramid& d, const SiftConfig& cfg,
                                                 RejectReason* reason = nullptr);

/// One keypoint per dominant gradient orientation (>= peak_ratio * max bin).
std::vector<Keypoint> assign_orientations(const RefinedKeypoint& rk, const ScaleSpacePyramid& p,
                                          const SiftConfig& cfg, RejectReason* reason = nullptr);

std::optional<Descriptor> compute_descriptor(const Keypoint& kp, const ScaleSpacePyramid& p,
                                             const SiftConfig& cfg,
                                             RejectReason* reason = nullptr);

struct Feature {
    Keypoint keypoint;
    Descriptor descriptor;
};

/// Full chain on one detection crop. Keypoint coordinates are in
/// original-frame space; output deterministically ordered.
std::vector<Feature> extract(const GrayImage& frame, const Detection& det, int detection_index,
                             const SiftConfig& cfg);

/// Extraction region: bbox padded by cfg.crop_margin, clamped to the frame.
BBox padded_crop_box(const BBox& bbox, int frame_w, int frame_h, double margin);

}  // namespace spotmatch
