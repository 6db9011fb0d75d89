#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spotmatch/cluster.hpp"
#include "spotmatch/core.hpp"

namespace spotmatch {

/// sequence_id -> individual_id; labels are optional per sequence.
using GroundTruthLabels = std::map<std::string, std::string>;

GroundTruthLabels load_labels(const std::string& path);
void save_labels(const GroundTruthLabels& labels, const std::string& path);

struct EvaluationReport {
    int n_matches = 0;       // edges with both endpoints labeled
    int n_correct = 0;
    int n_unverifiable = 0;  // edges with an unlabeled endpoint
    std::optional<double> success_rate;             // null when no verifiable matches
    std::map<std::string, double> cluster_purity;   // majority-label fraction per cluster
};

/// A match is a retained graph edge; it is correct iff both endpoints carry
/// the same individual label.
EvaluationReport evaluate(const ClusterGraph& graph, const GroundTruthLabels& labels);

enum class Difficulty { Easy, Medium, Hard };

Difficulty parse_difficulty(const std::string& name);

struct SyntheticSpec {
    uint64_t seed = 1;
    int n_individuals = 5;
    int videos_per_individual = 3;
    int frames_per_video = 10;
    Difficulty difficulty = Difficulty::Easy;
    int frame_width = 256;
    int frame_height = 192;
    int n_camera_locations = 0;  // 0 = auto (shared across individuals)
};

struct SyntheticDataset {
    std::string manifest_path;
    std::string labels_path;
    std::vector<std::string> sequence_ids;
};

/// Procedural spotted individuals rendered over shared static backgrounds.
/// Per-video similarity transform (rotation <= 25 deg, scale 0.7-1.4),
/// per-frame translation, difficulty-dependent noise and gain. Frames are
/// bit-deterministic from the seed.
SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec, const std::string& out_dir);

struct SweepRow {
    double threshold = 0.0;
    int n_matches = 0;
    std::optional<double> success_rate;
    std::optional<double> recall;  // beyond the case-study metric; see README
};

std::vector<SweepRow> threshold_sweep(const std::vector<SimilarityRecord>& records,
                                      const GroundTruthLabels& labels,
                                      const std::vector<double>& thresholds,
                                      const std::vector<std::string>& all_nodes = {});

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace spotmatch
