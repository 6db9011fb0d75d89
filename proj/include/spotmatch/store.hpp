#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "spotmatch/cluster.hpp"
#include "spotmatch/match.hpp"
#include "spotmatch/sift.hpp"

namespace spotmatch {

struct FeatureKey {
    std::string sequence_id;
    int frame_index = 0;
    int detection_index = 0;

    auto operator<=>(const FeatureKey&) const = default;
};

struct FeatureStoreEntry {
    FeatureKey key;
    std::vector<Keypoint> keypoints;
    std::vector<Descriptor> descriptors;  // same length as keypoints
};

/// In-memory feature map with a bit-exact binary file format:
/// magic "SPM1", u32 version, u64 entry count, then per entry the key
/// (length-prefixed sequence id, u32 frame, u32 detection), u32 keypoint
/// count, keypoints as 6 x f64 + 2 x i32, descriptors as 128 x f32.
/// Everything little-endian.
class FeatureStore {
public:
    void put(FeatureStoreEntry entry);
    const FeatureStoreEntry& get(const FeatureKey& key) const;
    bool contains(const FeatureKey& key) const { return entries_.count(key) > 0; }
    size_t size() const { return entries_.size(); }

    const std::map<FeatureKey, FeatureStoreEntry>& entries() const { return entries_; }

    void save(const std::string& path) const;
    static FeatureStore load(const std::string& path);

private:
    std::map<FeatureKey, FeatureStoreEntry> entries_;
};

/// CSV with header; scores printed with 9 significant digits; rows sorted
/// by (video_a, video_b). Written atomically (temp file + rename).
void save_similarities(const std::vector<SimilarityRecord>& records, const std::string& path);
std::vector<SimilarityRecord> load_similarities(const std::string& path);

/// JSON roundtrip of partition, edges and conflicts. Loading validates that
/// the stored clusters are exactly the connected components of the edges.
void save_clusters(const ClusterGraph& graph, const std::string& path);
ClusterGraph load_clusters(const std::string& path);

/// Write a whole file atomically via temp-file-then-rename.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace spotmatch
