#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spotmatch/bench.hpp"
#include "spotmatch/detect.hpp"
#include "spotmatch/match.hpp"
#include "spotmatch/sift.hpp"

namespace spotmatch {

/// Full run configuration; everything lands in run_config.json so a run
/// directory documents itself.
struct RunConfig {
    std::string input_manifest;
    std::string detections_path;      // optional: import external detections
    std::string labels_path;          // optional: ground truth for evaluate
    std::string out_dir = "run";
    uint64_t seed = 1;
    int workers = 1;

    // ingest
    int frames_per_video = 5;  // sampling target per sequence

    // detect
    double min_confidence = 0.5;   // imported detections
    double diff_threshold = 0.12;  // motion detector
    int min_area = 120;
    int background_cap = 64;
    bool crop_to_detection = true;

    // species-classification hook (pass-through by default)
    std::string species_labels_path;  // per-frame labels, "<seq>/<frame>" -> species
    std::string species_of_interest;  // empty accepts everything

    // features
    SiftConfig sift;

    // matching / clustering
    double ratio = 0.8;
    double threshold = 4.5;

    // report
    bool thumbnails = true;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

/// Environment overrides with the SPOTMATCH_ prefix (e.g.
/// SPOTMATCH_THRESHOLD, SPOTMATCH_WORKERS, SPOTMATCH_SEED,
/// SPOTMATCH_OUT_DIR, SPOTMATCH_RATIO).
void apply_env_overrides(RunConfig& cfg);

struct StageResult {
    std::string stage;
    bool cached = false;
};

inline const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> stages = {"ingest",  "detect", "extract",
                                                    "match",   "cluster", "report"};
    return stages;
}

/// Run every stage in order, skipping stages whose inputs are unchanged
/// (content-hash check) and whose outputs already exist.
std::vector<StageResult> run_pipeline(const RunConfig& cfg);

/// Run exactly one stage against an existing run directory; throws
/// StaleInputs when required upstream artifacts are missing and
/// UnknownStage for unrecognized names. Also accepts "evaluate".
void run_stage(const RunConfig& cfg, const std::string& stage);

/// Paths of the artifacts inside a run directory.
struct RunPaths {
    std::string config;
    std::string sequences;
    std::string detections;
    std::string features;
    std::string similarities;
    std::string clusters;
    std::string report_html;
    std::string membership_csv;
    std::string pairs_csv;
    std::string evaluation;
    std::string stage_state;
};
RunPaths run_paths(const std::string& out_dir);

}  // namespace spotmatch
