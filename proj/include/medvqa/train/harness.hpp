#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "medvqa/model/adapter.hpp"
#include "medvqa/train/config.hpp"

namespace medvqa::train {

struct RunManifest {
    std::string run_id;
    TrainConfig config;
    std::string config_hash;
    std::map<std::string, std::string> dataset_hashes;  // "train" / "val" -> digest
    std::map<std::string, std::string> dataset_paths;
    std::string started;
    std::string finished;
    std::string adapter_backend;
    std::string status;  // started | completed | failed
    std::string error;
    std::string backend_run_id;
    nlohmann::json backend_details = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

std::filesystem::path manifest_path(const std::filesystem::path& runs_dir, const std::string& run_id);
RunManifest read_manifest(const std::filesystem::path& path);

// Hashes the datasets, allocates a fresh runs/<run_id>/ directory (never
// reusing an existing one) and writes the initial manifest.
RunManifest prepare_run(const std::string& backend, const std::filesystem::path& train_file,
                        const std::filesystem::path& val_file, const TrainConfig& config,
                        const std::filesystem::path& runs_dir);

// Re-checks dataset hashes, calls fine_tune once, writes the final manifest.
// Hash mismatches raise Error(Integrity); adapter errors are recorded in the
// manifest and rethrown.
RunManifest execute_run(model::ModelAdapter& adapter, RunManifest manifest, const std::filesystem::path& runs_dir);

RunManifest run_training(model::ModelAdapter& adapter, const std::filesystem::path& train_file,
                         const std::filesystem::path& val_file, const TrainConfig& config,
                         const std::filesystem::path& runs_dir);

}  // namespace medvqa::train
