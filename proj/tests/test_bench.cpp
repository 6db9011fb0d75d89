#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spotmatch/bench.hpp"
#include "spotmatch/ingest.hpp"
#include "test_util.hpp"

using namespace spotmatch;
namespace fs = std::filesystem;

namespace {

SimilarityRecord rec(const std::string& a, const std::string& b, double score) {
    SimilarityRecord r;
    r.video_a = std::min(a, b);
    r.video_b = std::max(a, b);
    r.score = score;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("labels CSV roundtrip") {
    const auto dir = test_util::temp_dir("labels_rt");
    GroundTruthLabels labels{{"seq_a", "ind_1"}, {"seq_b", "ind_1"}, {"seq_c", "ind_2"}};
    save_labels(labels, dir + "/l.csv");
    CHECK(load_labels(dir + "/l.csv") == labels);

    // header is optional
    std::ofstream(dir + "/bare.csv") << "x,y\n";
    const auto bare = load_labels(dir + "/bare.csv");
    CHECK(bare.at("x") == "y");

    std::ofstream(dir + "/bad.csv") << "sequence_id,individual_id\nno_comma_here\n";
    try {
        load_labels(dir + "/bad.csv");
        FAIL("expected Parse");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
    CHECK_THROWS_AS(load_labels(dir + "/absent.csv"), Error);
}

TEST_CASE("116 matches with 97 correct gives the expected success rate") {
    ClusterGraph g;
    g.threshold = 1.0;
    GroundTruthLabels labels;
    char a[16], b[16];
    for (int i = 0; i < 116; i++) {
        std::snprintf(a, sizeof(a), "a%03d", i);
        std::snprintf(b, sizeof(b), "b%03d", i);
        g.add_node(a);
        g.add_node(b);
        g.edges.push_back({a, b, 2.0});
        labels[a] = "ind" + std::to_string(i);
        // first 97 edges correct, remaining 19 wrong
        labels[b] = (i < 97) ? labels[a] : "other" + std::to_string(i);
    }
    const auto report = evaluate(g, labels);
    CHECK(report.n_matches == 116);
    CHECK(report.n_correct == 97);
    CHECK(report.n_unverifiable == 0);
    REQUIRE(report.success_rate.has_value());
    CHECK(std::fabs(*report.success_rate - 0.8362) <= 0.0001);
}

TEST_CASE("evaluation is invariant under relabeling individuals") {
    ClusterGraph g;
    g.threshold = 1.0;
    for (const auto& [x, y] : std::vector<std::pair<std::string, std::string>>{
             {"p", "q"}, {"q", "r"}, {"r", "s"}, {"p", "s"}}) {
        g.add_node(x);
        g.add_node(y);
        g.edges.push_back({std::min(x, y), std::max(x, y), 2.0});
    }
    GroundTruthLabels original{{"p", "i1"}, {"q", "i1"}, {"r", "i2"}, {"s", "i2"}};
    GroundTruthLabels renamed{{"p", "zebra"}, {"q", "zebra"}, {"r", "okapi"}, {"s", "okapi"}};
    const auto r1 = evaluate(g, original);
    const auto r2 = evaluate(g, renamed);
    CHECK(r1.n_matches == r2.n_matches);
    CHECK(r1.n_correct == r2.n_correct);
    CHECK(r1.success_rate == r2.success_rate);
    CHECK(r1.n_correct == 2);  // p-q and r-s
}

TEST_CASE("unlabeled endpoints are unverifiable, not wrong") {
    ClusterGraph g;
    g.threshold = 1.0;
    for (const char* n : {"a", "b", "c"}) g.add_node(n);
    g.edges.push_back({"a", "b", 2.0});
    g.edges.push_back({"b", "c", 2.0});
    const auto report = evaluate(g, GroundTruthLabels{{"a", "i1"}, {"b", "i1"}});
    CHECK(report.n_matches == 1);
    CHECK(report.n_correct == 1);
    CHECK(report.n_unverifiable == 1);

    const auto empty = evaluate(g, GroundTruthLabels{});
    CHECK(empty.n_matches == 0);
    CHECK_FALSE(empty.success_rate.has_value());
    CHECK(empty.n_unverifiable == 2);
}

TEST_CASE("cluster purity is the majority-label fraction") {
    ClusterGraph g;
    g.threshold = 1.0;
    for (const char* n : {"a", "b", "c", "d"}) g.add_node(n);
    g.edges.push_back({"a", "b", 2.0});
    g.edges.push_back({"b", "c", 2.0});
    const auto report =
        evaluate(g, GroundTruthLabels{{"a", "i1"}, {"b", "i1"}, {"c", "i2"}, {"d", "i9"}});
    REQUIRE(report.cluster_purity.count("a"));
    CHECK(report.cluster_purity.at("a") == doctest::Approx(2.0 / 3.0));
    CHECK(report.cluster_purity.at("d") == doctest::Approx(1.0));
}

TEST_CASE("difficulty names parse strictly") {
    CHECK(parse_difficulty("easy") == Difficulty::Easy);
    CHECK(parse_difficulty("medium") == Difficulty::Medium);
    CHECK(parse_difficulty("hard") == Difficulty::Hard);
    CHECK_THROWS_AS(parse_difficulty("EASY"), Error);
}

TEST_CASE("synthetic dataset layout, labels and loadability") {
    const auto dir = test_util::temp_dir("synth_small");
    SyntheticSpec spec;
    spec.seed = 11;
    spec.n_individuals = 2;
    spec.videos_per_individual = 2;
    spec.frames_per_video = 2;
    const auto ds = generate_synthetic_dataset(spec, dir);

    REQUIRE(ds.sequence_ids.size() == 4);
    CHECK(ds.sequence_ids[0] == "ind00_v00");
    CHECK(ds.sequence_ids[3] == "ind01_v01");

    const auto seqs = load_manifest(ds.manifest_path);
    REQUIRE(seqs.size() == 4);
    for (const auto& s : seqs) {
        CHECK(s.frames.size() == 2);
        CHECK(s.frames[0].width == spec.frame_width);
        CHECK(s.frames[0].height == spec.frame_height);
    }
    const auto labels = load_labels(ds.labels_path);
    CHECK(labels.at("ind00_v01") == "individual_0");
    CHECK(labels.at("ind01_v00") == "individual_1");

    // camera locations are shared across different individuals
    std::set<std::string> cams;
    for (const auto& s : seqs) cams.insert(s.camera_location_id);
    CHECK(cams.size() >= 2);
    CHECK(cams.size() < seqs.size());
}

TEST_CASE("synthetic frames are bit-deterministic in the seed") {
    const auto dir1 = test_util::temp_dir("synth_det1");
    const auto dir2 = test_util::temp_dir("synth_det2");
    const auto dir3 = test_util::temp_dir("synth_det3");
    SyntheticSpec spec;
    spec.seed = 77;
    spec.n_individuals = 1;
    spec.videos_per_individual = 2;
    spec.frames_per_video = 2;
    generate_synthetic_dataset(spec, dir1);
    generate_synthetic_dataset(spec, dir2);
    spec.seed = 78;
    generate_synthetic_dataset(spec, dir3);

    bool any_differs = false;
    for (const auto& seq : {"ind00_v00", "ind00_v01"}) {
        for (const auto& frame : {"f0000.pgm", "f0001.pgm"}) {
            const auto rel = std::string("/frames/") + seq + "/" + frame;
            CHECK(slurp(dir1 + rel) == slurp(dir2 + rel));
            if (slurp(dir1 + rel) != slurp(dir3 + rel)) any_differs = true;
        }
    }
    CHECK(any_differs);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec spec;
    spec.n_individuals = 0;
    CHECK_THROWS_AS(generate_synthetic_dataset(spec, test_util::temp_dir("synth_bad")), Error);
}

TEST_CASE("threshold sweep validates its input") {
    const GroundTruthLabels labels;
    CHECK_THROWS_AS(threshold_sweep({}, labels, {0.5}), Error);
    CHECK_THROWS_AS(threshold_sweep({}, labels, {0.9, 0.5}), Error);
}

TEST_CASE("threshold sweep trades matches for precision") {
    // individuals A = {a1, a2, a3} and B = {b1, b2, c1}; the wrong pair
    // a1-c1 attaches the otherwise-unmatched c1 at the low threshold only
    const std::vector<SimilarityRecord> records{
        rec("a1", "a2", 0.9), rec("a2", "a3", 0.8), rec("b1", "b2", 0.7),
        rec("a1", "c1", 0.55),
    };
    const GroundTruthLabels labels{{"a1", "A"}, {"a2", "A"}, {"a3", "A"},
                                   {"b1", "B"}, {"b2", "B"}, {"c1", "B"}};

    const auto rows = threshold_sweep(records, labels, {0.5, 0.75, 0.95});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].n_matches == 4);
    CHECK(rows[1].n_matches == 2);
    CHECK(rows[2].n_matches == 0);
    for (size_t i = 1; i < rows.size(); i++) CHECK(rows[i].n_matches <= rows[i - 1].n_matches);

    // true pairs: C(3,2) + C(3,2) = 6
    REQUIRE(rows[0].success_rate.has_value());
    CHECK(*rows[0].success_rate == doctest::Approx(3.0 / 4.0));
    REQUIRE(rows[0].recall.has_value());
    CHECK(*rows[0].recall == doctest::Approx(3.0 / 6.0));
    CHECK(*rows[1].success_rate == doctest::Approx(1.0));
    CHECK(*rows[1].recall == doctest::Approx(2.0 / 6.0));
    CHECK_FALSE(rows[2].success_rate.has_value());
    CHECK(*rows[2].recall == doctest::Approx(0.0));
}

TEST_CASE("sweep CSV includes nulls for undefined rates") {
    std::vector<SweepRow> rows(2);
    rows[0].threshold = 0.5;
    rows[0].n_matches = 3;
    rows[0].success_rate = 2.0 / 3.0;
    rows[0].recall = 0.5;
    rows[1].threshold = 0.9;
    const std::string csv = sweep_to_csv(rows);
    CHECK(csv.rfind("threshold,n_matches,success_rate,recall\n", 0) == 0);
    CHECK(csv.find("0.5,3,0.666667,0.500000") != std::string::npos);
    CHECK(csv.find("0.9,0,null,null") != std::string::npos);
}
