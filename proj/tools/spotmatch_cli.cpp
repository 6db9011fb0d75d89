#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "spotmatch/bench.hpp"
#include "spotmatch/pipeline.hpp"
#include "spotmatch/store.hpp"

using namespace spotmatch;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string manifest;
    std::string detections;
    std::string labels;
    std::string out_dir;
    double threshold = -1.0;
    int workers = -1;
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run configuration JSON");
    cmd->add_option("--input-manifest", flags.manifest, "dataset manifest path");
    cmd->add_option("--detections", flags.detections, "imported detections JSON (optional)");
    cmd->add_option("--labels", flags.labels, "ground-truth labels CSV");
    cmd->add_option("--out-dir", flags.out_dir, "run directory");
    cmd->add_option("--threshold", flags.threshold, "similarity threshold for clustering");
    cmd->add_option("--workers", flags.workers, "worker thread count");
    cmd->add_option("--seed", flags.seed, "layout / synthetic seed");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) cfg = load_run_config(flags.config_path);
    apply_env_overrides(cfg);
    if (!flags.manifest.empty()) cfg.input_manifest = flags.manifest;
    if (!flags.detections.empty()) cfg.detections_path = flags.detections;
    if (!flags.labels.empty()) cfg.labels_path = flags.labels;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.threshold >= 0.0) cfg.threshold = flags.threshold;
    if (flags.workers >= 0) cfg.workers = flags.workers;
    if (flags.seed >= 0) cfg.seed = static_cast<uint64_t>(flags.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spotmatch: individual identification from camera-trap frame sequences"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string stage_name;

    auto* run = app.add_subcommand("run", "full pipeline: ingest through report");
    add_common(run, flags);

    for (const auto& stage : pipeline_stages()) {
        auto* cmd = app.add_subcommand(stage, "run only the " + stage + " stage");
        add_common(cmd, flags);
    }
    auto* eval_cmd = app.add_subcommand("evaluate", "score clusters against ground-truth labels");
    add_common(eval_cmd, flags);

    auto* synth = app.add_subcommand("synth", "generate a synthetic spotted-individual dataset");
    add_common(synth, flags);
    int n_individuals = 5, videos_per = 3, frames_per = 10;
    std::string difficulty = "easy";
    std::string synth_dir = "synthetic";
    synth->add_option("--individuals", n_individuals, "number of synthetic individuals");
    synth->add_option("--videos-per-individual", videos_per, "videos per individual");
    synth->add_option("--frames-per-video", frames_per, "frames per video");
    synth->add_option("--difficulty", difficulty, "easy|medium|hard");
    synth->add_option("--dataset-dir", synth_dir, "output dataset directory");

    auto* sweep = app.add_subcommand("sweep", "evaluate over a range of thresholds");
    add_common(sweep, flags);
    std::vector<double> sweep_thresholds;
    std::string sweep_out = "sweep.csv";
    sweep->add_option("--thresholds", sweep_thresholds, "ascending threshold list")->expected(-1);
    sweep->add_option("--sweep-out", sweep_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunConfig cfg = resolve_config(flags);

        if (run->parsed()) {
            const auto results = run_pipeline(cfg);
            for (const auto& r : results)
                std::printf("%-8s %s\n", r.stage.c_str(), r.cached ? "cached" : "done");
            std::printf("run directory: %s\n", cfg.out_dir.c_str());
            return 0;
        }
        if (synth->parsed()) {
            SyntheticSpec spec;
            spec.seed = cfg.seed;
            spec.n_individuals = n_individuals;
            spec.videos_per_individual = videos_per;
            spec.frames_per_video = frames_per;
            spec.difficulty = parse_difficulty(difficulty);
            const auto ds = generate_synthetic_dataset(spec, synth_dir);
            std::printf("manifest: %s\nlabels:   %s\nvideos:   %zu\n", ds.manifest_path.c_str(),
                        ds.labels_path.c_str(), ds.sequence_ids.size());
            return 0;
        }
        if (sweep->parsed()) {
            const RunPaths paths = run_paths(cfg.out_dir);
            const auto records = load_similarities(paths.similarities);
            if (cfg.labels_path.empty())
                throw Error(ErrorCode::InvalidConfig, "sweep needs --labels");
            const auto labels = load_labels(cfg.labels_path);
            const auto rows = threshold_sweep(records, labels, sweep_thresholds);
            const std::string csv = sweep_to_csv(rows);
            atomic_write(sweep_out, csv);
            std::fputs(csv.c_str(), stdout);
            return 0;
        }
        if (eval_cmd->parsed()) {
            run_stage(cfg, "evaluate");
            std::ifstream in(run_paths(cfg.out_dir).evaluation);
            std::cout << in.rdbuf();
            return 0;
        }
        for (const auto& stage : pipeline_stages()) {
            if (app.get_subcommand(stage)->parsed()) {
                run_stage(cfg, stage);
                std::printf("%s done\n", stage.c_str());
                return 0;
            }
        }
        throw Error(ErrorCode::UnknownStage, "no subcommand");
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return error_code_exit_status(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
