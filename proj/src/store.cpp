#include "spotmatch/store.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace spotmatch {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'M', '1'};
constexpr uint32_t kFeatureVersion = 1;
constexpr int kClustersVersion = 1;
constexpr const char* kSimilarityHeader =
    "video_a,video_b,score,best_frame_a,best_frame_b,n_contributing_matches,same_camera_location";

template <typename T>
void put_raw(std::string& buf, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf.append(tmp, sizeof(T));  // host is little-endian; format is little-endian
}

template <typename T>
T get_raw(std::istream& in) {
    T v;
    char tmp[sizeof(T)];
    in.read(tmp, sizeof(T));
    if (in.gcount() != sizeof(T)) throw Error(ErrorCode::Parse, "truncated feature store");
    std::memcpy(&v, tmp, sizeof(T));
    return v;
}

void put_string(std::string& buf, const std::string& s) {
    put_raw<uint32_t>(buf, static_cast<uint32_t>(s.size()));
    buf.append(s);
}

std::string get_string(std::istream& in) {
    const uint32_t len = get_raw<uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (static_cast<uint32_t>(in.gcount()) != len)
        throw Error(ErrorCode::Parse, "truncated string in feature store");
    return s;
}

std::string format_score(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "rename failed: " + ec.message());
}

void FeatureStore::put(FeatureStoreEntry entry) {
    if (entry.keypoints.size() != entry.descriptors.size())
        throw Error(ErrorCode::InvariantViolation, "keypoint/descriptor count mismatch");
    auto [it, inserted] = entries_.emplace(entry.key, std::move(entry));
    if (!inserted)
        throw Error(ErrorCode::DuplicateKey,
                    it->first.sequence_id + "/" + std::to_string(it->first.frame_index));
}

const FeatureStoreEntry& FeatureStore::get(const FeatureKey& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
        throw Error(ErrorCode::NotFound, key.sequence_id + "/" + std::to_string(key.frame_index) +
                                             "/" + std::to_string(key.detection_index));
    return it->second;
}

void FeatureStore::save(const std::string& path) const {
    std::string buf;
    buf.append(kMagic, 4);
    put_raw<uint32_t>(buf, kFeatureVersion);
    put_raw<uint64_t>(buf, entries_.size());
    for (const auto& [key, entry] : entries_) {
        put_string(buf, key.sequence_id);
        put_raw<uint32_t>(buf, static_cast<uint32_t>(key.frame_index));
        put_raw<uint32_t>(buf, static_cast<uint32_t>(key.detection_index));
        put_raw<uint32_t>(buf, static_cast<uint32_t>(entry.keypoints.size()));
        for (const auto& kp : entry.keypoints) {
            put_raw<double>(buf, kp.x);
            put_raw<double>(buf, kp.y);
            put_raw<double>(buf, kp.scale);
            put_raw<double>(buf, kp.orientation);
            put_raw<double>(buf, kp.response);
            put_raw<double>(buf, kp.level);
            put_raw<int32_t>(buf, kp.octave);
            put_raw<int32_t>(buf, kp.detection_index);
        }
        for (const auto& desc : entry.descriptors)
            for (float v : desc) put_raw<float>(buf, v);
    }
    atomic_write(path, buf);
}

FeatureStore FeatureStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(ErrorCode::Parse, "bad magic in " + path);
    const uint32_t version = get_raw<uint32_t>(in);
    if (version > kFeatureVersion)
        throw Error(ErrorCode::VersionMismatch,
                    "feature store version " + std::to_string(version));
    const uint64_t count = get_raw<uint64_t>(in);

    FeatureStore store;
    for (uint64_t i = 0; i < count; i++) {
        FeatureStoreEntry entry;
        entry.key.sequence_id = get_string(in);
        entry.key.frame_index = static_cast<int>(get_raw<uint32_t>(in));
        entry.key.detection_index = static_cast<int>(get_raw<uint32_t>(in));
        const uint32_t n = get_raw<uint32_t>(in);
        entry.keypoints.resize(n);
        entry.descriptors.resize(n);
        for (uint32_t k = 0; k < n; k++) {
            Keypoint& kp = entry.keypoints[k];
            kp.x = get_raw<double>(in);
            kp.y = get_raw<double>(in);
            kp.scale = get_raw<double>(in);
            kp.orientation = get_raw<double>(in);
            kp.response = get_raw<double>(in);
            kp.level = get_raw<double>(in);
            kp.octave = get_raw<int32_t>(in);
            kp.detection_index = get_raw<int32_t>(in);
        }
        for (uint32_t k = 0; k < n; k++)
            for (int j = 0; j < 128; j++) entry.descriptors[k][j] = get_raw<float>(in);
        store.entries_.emplace(entry.key, std::move(entry));
    }
    return store;
}

void save_similarities(const std::vector<SimilarityRecord>& records, const std::string& path) {
    std::vector<SimilarityRecord> sorted = records;
    std::sort(sorted.begin(), sorted.end(), [](const SimilarityRecord& a, const SimilarityRecord& b) {
        return std::tie(a.video_a, a.video_b) < std::tie(b.video_a, b.video_b);
    });
    std::ostringstream out;
    out << kSimilarityHeader << "\n";
    for (const auto& r : sorted) {
        out << r.video_a << ',' << r.video_b << ',' << format_score(r.score) << ','
            << r.best_frame_a << ',' << r.best_frame_b << ',' << r.n_contributing_matches << ','
            << (r.same_camera_location ? "true" : "false") << "\n";
    }
    atomic_write(path, out.str());
}

std::vector<SimilarityRecord> load_similarities(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kSimilarityHeader)
        throw Error(ErrorCode::Parse, "bad similarities header in " + path);

    std::vector<SimilarityRecord> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) continue;
        const auto cols = split_csv(line);
        if (cols.size() != 7)
            throw Error(ErrorCode::Parse, path + ": wrong column count at line " + std::to_string(line_no));
        SimilarityRecord r;
        r.video_a = cols[0];
        r.video_b = cols[1];
        try {
            size_t pos = 0;
            r.score = std::stod(cols[2], &pos);
            if (pos != cols[2].size()) throw std::invalid_argument(cols[2]);
            r.best_frame_a = std::stoi(cols[3]);
            r.best_frame_b = std::stoi(cols[4]);
            r.n_contributing_matches = std::stoi(cols[5]);
        } catch (const std::exception&) {
            throw Error(ErrorCode::Parse, path + ": bad numeric field at line " + std::to_string(line_no));
        }
        if (cols[6] == "true") r.same_camera_location = true;
        else if (cols[6] == "false") r.same_camera_location = false;
        else throw Error(ErrorCode::Parse, path + ": bad flag at line " + std::to_string(line_no));
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const SimilarityRecord& a, const SimilarityRecord& b) {
        return std::tie(a.video_a, a.video_b) < std::tie(b.video_a, b.video_b);
    });
    return out;
}

void save_clusters(const ClusterGraph& graph, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "spotmatch-clusters";
    doc["version"] = kClustersVersion;
    doc["threshold"] = graph.threshold;
    doc["clusters"] = nlohmann::json::array();
    for (const auto& c : components(graph)) {
        nlohmann::json jc;
        jc["cluster_id"] = c.cluster_id;
        jc["members"] = c.members;
        jc["edges"] = nlohmann::json::array();
        for (const auto& e : c.edges)
            jc["edges"].push_back({{"a", e.a}, {"b", e.b}, {"score", e.score}});
        doc["clusters"].push_back(std::move(jc));
    }
    doc["conflicts"] = nlohmann::json::array();
    for (const auto& e : graph.conflicts)
        doc["conflicts"].push_back({{"a", e.a}, {"b", e.b}, {"score", e.score}});
    atomic_write(path, doc.dump(2) + "\n");
}

ClusterGraph load_clusters(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, e.what());
    }
    try {
        if (doc.value("format", "") != "spotmatch-clusters")
            throw Error(ErrorCode::Parse, "not a clusters file: " + path);
        if (doc.value("version", 0) > kClustersVersion)
            throw Error(ErrorCode::VersionMismatch, "clusters file version too new");

        ClusterGraph graph;
        graph.threshold = doc.at("threshold").get<double>();
        std::map<std::string, std::string> claimed;  // node -> cluster_id
        std::map<std::string, std::set<std::string>> stored_partition;
        for (const auto& jc : doc.at("clusters")) {
            const std::string cid = jc.at("cluster_id").get<std::string>();
            for (const auto& m : jc.at("members")) {
                const std::string node = m.get<std::string>();
                auto [it, inserted] = claimed.emplace(node, cid);
                if (!inserted)
                    throw Error(ErrorCode::InvariantViolation,
                                "node " + node + " appears in clusters " + it->second + " and " + cid);
                graph.add_node(node);
                stored_partition[cid].insert(node);
            }
            for (const auto& je : jc.at("edges"))
                graph.edges.push_back({je.at("a").get<std::string>(), je.at("b").get<std::string>(),
                                       je.at("score").get<double>()});
        }
        for (const auto& je : doc.at("conflicts"))
            graph.conflicts.push_back({je.at("a").get<std::string>(), je.at("b").get<std::string>(),
                                       je.at("score").get<double>()});

        // stored clusters must be exactly the connected components
        for (const auto& c : components(graph)) {
            auto it = stored_partition.find(c.cluster_id);
            std::set<std::string> members(c.members.begin(), c.members.end());
            if (it == stored_partition.end() || it->second != members)
                throw Error(ErrorCode::InvariantViolation,
                            "stored clusters are not the connected components of the edges");
        }
        if (stored_partition.size() != components(graph).size())
            throw Error(ErrorCode::InvariantViolation, "cluster count mismatch");
        return graph;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, e.what());
    }
}

}  // namespace spotmatch
