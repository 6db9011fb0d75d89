#pragma once

#include <string>
#include <vector>

#include "spotmatch/core.hpp"

namespace spotmatch {

/// Parse a dataset manifest (JSON array of sequence entries). Frames are
/// matched by glob inside each entry's frames_dir and ordered by natural
/// numeric sort of filename.
std::vector<VideoSequence> load_manifest(const std::string& manifest_path);

/// Frames at indices 0, stride, 2*stride, ... truncated to max_frames.
std::vector<FrameRef> sample_frames(const VideoSequence& seq, int stride, int max_frames);

/// Stride so that roughly `target` frames survive sampling.
int stride_for_target(int n_frames, int target);

/// Decode PGM/PPM (8-bit, ascii or binary) or PNG to luminance in [0, 1].
/// RGB uses ITU-R 601 weights 0.299/0.587/0.114.
GrayImage decode_image(const std::string& path);

/// Binary 8-bit PGM writer; values clamped to [0, 1] and scaled to 0..255.
void write_pgm(const GrayImage& img, const std::string& path);

/// In-memory 8-bit grayscale PNG, base64-encoded (for inline data URIs).
std::string encode_png_base64(const GrayImage& img);

/// Nearest-neighbor resize used for report thumbnails.
GrayImage resize_nearest(const GrayImage& img, int new_w, int new_h);

/// Natural comparison: digit runs compare numerically, the rest bytewise.
bool natural_less(const std::string& a, const std::string& b);

/// Simple glob with '*' and '?' against a bare filename.
bool glob_match(const std::string& pattern, const std::string& name);

}  // namespace spotmatch
