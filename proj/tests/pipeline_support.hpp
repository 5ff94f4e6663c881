#pragma once

// Drives the command-line front end in-process over a fixture tree.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "medvqa/cli/app.hpp"

namespace testing {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliResult r;
    r.code = medvqa::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Every stage from explanation forging to the radar export, with outputs in
// the config's work directory. Returns the first failing stage, or an empty
// result with code 0.
struct StageFailure {
    std::string stage;
    CliResult result;
};

inline StageFailure run_pipeline(const std::filesystem::path& root) {
    const std::string cfg = (root / "config.ini").string();
    const std::string work = (root / "work").string();
    const std::vector<std::pair<std::string, std::vector<std::string>>> stages{
        {"forge-explanations", {"--qa", (root / "qa.jsonl").string()}},
        {"forge-regions", {"--cases", (root / "cases.json").string(), "--qa", (root / "qa.jsonl").string()}},
        {"assemble",
         {"--qa", (root / "qa.jsonl").string(), "--explanations", work + "/explanations/explanations.jsonl",
          "--regions", work + "/regions/regions.jsonl"}},
        {"split", {"--in", work + "/multitask/multitask.jsonl"}},
        {"train", {"--train", work + "/split/train.jsonl", "--val", work + "/split/val.jsonl"}},
        {"infer", {"--subtask", "2", "--in", root.string()}},
        {"evaluate", {"--pred", work + "/predictions/predictions.jsonl", "--ref", (root / "refs.jsonl").string()}},
        {"radar", {"--judge", (root / "judge.json").string()}},
    };
    for (const auto& [name, extra] : stages) {
        std::vector<std::string> args{"--config", cfg, name};
        args.insert(args.end(), extra.begin(), extra.end());
        CliResult r = run_cli(args);
        if (r.code != 0) return {name, r};
    }
    return {};
}

// relative path -> file bytes, skipping any path under a directory named
// in `skip`.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir,
                                                   const std::vector<std::string>& skip = {}) {
    std::map<std::string, std::string> out;
    if (!std::filesystem::exists(dir)) return out;
    for (auto it = std::filesystem::recursive_directory_iterator(dir); it != std::filesystem::end(it); ++it) {
        const auto rel = std::filesystem::relative(it->path(), dir);
        if (it->is_directory() && std::find(skip.begin(), skip.end(), rel.generic_string()) != skip.end()) {
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        std::ifstream in(it->path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[rel.generic_string()] = ss.str();
    }
    return out;
}

}  // namespace testing
