#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spotmatch {

enum class ErrorCode {
    ManifestParse,
    DuplicateSequenceId,
    MissingFrames,
    UnsupportedFormat,
    CorruptImage,
    DetectionParse,
    NoFramesMatched,
    DimensionMismatch,
    InsufficientFrames,
    ImageTooSmall,
    NoFeatures,
    DuplicateKey,
    NotFound,
    Parse,
    InvariantViolation,
    VersionMismatch,
    NoVerifiableMatches,
    UnknownStage,
    StaleInputs,
    InvalidConfig,
    Io,
};

const char* error_code_name(ErrorCode code);

/// Exit code for the CLI; distinct small integers per error class.
int error_code_exit_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

struct FrameRef {
    std::string sequence_id;
    int frame_index = 0;
    std::string image_path;
    int width = 0;
    int height = 0;

    bool operator==(const FrameRef&) const = default;
};

/// One camera trigger: ordered frames plus site/camera metadata. The unit of
/// identity; every frame is assumed to show the same individual.
struct VideoSequence {
    std::string sequence_id;
    std::string camera_location_id;
    std::string site_id;
    std::optional<std::string> captured_at;  // ISO-8601 UTC
    std::vector<FrameRef> frames;

    bool operator==(const VideoSequence&) const = default;
};

/// Row-major luminance image, values in [0, 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    float& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    bool operator==(const GrayImage&) const = default;
};

}  // namespace spotmatch
