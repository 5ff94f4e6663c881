#include "medvqa/train/harness.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "medvqa/error.hpp"
#include "medvqa/util/files.hpp"
#include "medvqa/util/hash.hpp"

namespace medvqa::train {

namespace fs = std::filesystem;

nlohmann::json to_json(const RunManifest& m) {
    return {{"run_id", m.run_id},
            {"config", to_json(m.config)},
            {"config_hash", m.config_hash},
            {"effective_batch", m.config.effective_batch()},
            {"dataset_hashes", m.dataset_hashes},
            {"dataset_paths", m.dataset_paths},
            {"started", m.started},
            {"finished", m.finished},
            {"adapter_backend", m.adapter_backend},
            {"status", m.status},
            {"error", m.error},
            {"backend_run_id", m.backend_run_id},
            {"backend_details", m.backend_details}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        nlohmann::json cfg = j.at("config");
        m.config = config_from_json(cfg);
        m.config_hash = j.at("config_hash").get<std::string>();
        m.dataset_hashes = j.at("dataset_hashes").get<std::map<std::string, std::string>>();
        m.dataset_paths = j.value("dataset_paths", std::map<std::string, std::string>{});
        m.started = j.value("started", "");
        m.finished = j.value("finished", "");
        m.adapter_backend = j.value("adapter_backend", "");
        m.status = j.value("status", "");
        m.error = j.value("error", "");
        m.backend_run_id = j.value("backend_run_id", "");
        m.backend_details = j.value("backend_details", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("run manifest: ") + e.what());
    }
    if (config_hash(m.config) != m.config_hash)
        fail(ErrorKind::Integrity, "run manifest " + m.run_id + ": config_hash does not match config");
    return m;
}

fs::path manifest_path(const fs::path& runs_dir, const std::string& run_id) {
    return runs_dir / run_id / "manifest.json";
}

RunManifest read_manifest(const fs::path& path) {
    try {
        return manifest_from_json(nlohmann::json::parse(util::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

namespace {

void write(const RunManifest& m, const fs::path& runs_dir) {
    util::write_file_atomic(manifest_path(runs_dir, m.run_id), to_json(m).dump(2) + "\n");
}

std::string compact_stamp() {
    std::string ts = util::utc_timestamp();  // 2025-01-02T03:04:05.678Z
    ts.erase(std::remove_if(ts.begin(), ts.end(), [](char c) { return c == '-' || c == ':' || c == '.'; }),
             ts.end());
    return ts;
}

}  // namespace

RunManifest prepare_run(const std::string& backend, const fs::path& train_file, const fs::path& val_file,
                        const TrainConfig& config, const fs::path& runs_dir) {
    config.validate();
    RunManifest m;
    m.config = config;
    m.config_hash = config_hash(config);
    m.dataset_hashes = {{"train", util::file_digest(train_file)}, {"val", util::file_digest(val_file)}};
    m.dataset_paths = {{"train", fs::absolute(train_file).string()}, {"val", fs::absolute(val_file).string()}};
    m.adapter_backend = backend;
    m.status = "started";
    m.started = util::utc_timestamp();

    fs::create_directories(runs_dir);
    const std::string stem = "run-" + compact_stamp() + "-" + m.config_hash.substr(0, 8);
    for (int n = 0;; ++n) {
        const std::string id = stem + "-" + std::to_string(n);
        if (fs::create_directory(runs_dir / id)) {
            m.run_id = id;
            break;
        }
    }
    write(m, runs_dir);
    return m;
}

RunManifest execute_run(model::ModelAdapter& adapter, RunManifest m, const fs::path& runs_dir) {
    auto finish = [&](const std::string& status, const std::string& error) {
        m.status = status;
        m.error = error;
        m.finished = util::utc_timestamp();
        write(m, runs_dir);
    };
    const fs::path train_file = m.dataset_paths.at("train");
    const fs::path val_file = m.dataset_paths.at("val");
    for (const auto& [name, path] : m.dataset_paths) {
        const std::string now = util::file_digest(path);
        if (now != m.dataset_hashes.at(name)) {
            const std::string msg = "dataset hash mismatch for " + name + " (" + path + "): expected " +
                                    m.dataset_hashes.at(name) + ", found " + now;
            finish("failed", msg);
            fail(ErrorKind::Integrity, msg);
        }
    }
    try {
        const model::RunHandle h = adapter.fine_tune({train_file, val_file, m.config, runs_dir / m.run_id});
        m.backend_run_id = h.run_id;
        m.backend_details = h.details;
    } catch (const std::exception& e) {
        spdlog::error("run {} failed: {}", m.run_id, e.what());
        finish("failed", e.what());
        throw;
    }
    finish("completed", "");
    return m;
}

RunManifest run_training(model::ModelAdapter& adapter, const fs::path& train_file, const fs::path& val_file,
                         const TrainConfig& config, const fs::path& runs_dir) {
    return execute_run(adapter, prepare_run(adapter.backend(), train_file, val_file, config, runs_dir), runs_dir);
}

}  // namespace medvqa::train
