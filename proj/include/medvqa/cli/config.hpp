#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "medvqa/train/config.hpp"

namespace medvqa::cli {

// INI-style configuration shared by every subcommand. Top-level keys:
// seed, workers. Sections: [paths] [forge] [codec] [train] [infer] [eval].
// Unknown sections or keys are Error(Config); relative paths are resolved
// against the directory of the config file.
struct PipelineConfig {
    std::uint64_t seed = 42;
    int workers = 4;

    struct Paths {
        std::filesystem::path work_dir = ".";
        std::filesystem::path images;
        std::filesystem::path audit_log;
    } paths;

    struct Forge {
        std::filesystem::path templates;
        std::filesystem::path mock_textgen;  // empty: HTTP client from environment
        std::filesystem::path mock_seg;
        double heatmap_thresh = 0.35;
        double min_area_frac = 0.01;
        int dark_border_max_mean = 10;
        double requests_per_minute = 0.0;
    } forge;

    struct Codec {
        int num_bins = 1000;
        double simplify_eps = 0.0;
    } codec;

    struct Train {
        train::TrainConfig config = train::default_train_config();
        double split_ratio = 0.9;
        std::string adapter = "toy";
        std::filesystem::path runs_dir = "runs";
    } train;

    struct Infer {
        std::string adapter = "toy";
        std::filesystem::path checkpoint;
        int max_tokens = 256;
        int top_k_record = 5;
        int confidence_k = 5;
    } infer;

    struct Eval {
        std::map<std::string, double> ingested;  // [eval] ingested.<name> = value
    } eval;
};

// Defaults with relative paths resolved against base_dir.
PipelineConfig default_config(const std::filesystem::path& base_dir);

PipelineConfig load_config(const std::filesystem::path& file);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

}  // namespace medvqa::cli
