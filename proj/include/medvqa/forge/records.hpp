#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medvqa/tasks.hpp"

namespace medvqa::forge {

struct QASample {
    std::string sample_id;
    std::string image_id;
    std::string question;
    std::string answer;
    int complexity = 1;
    std::map<std::string, std::string> metadata;  // e.g. abnormality, location
};

struct Provenance {
    std::string cue_request_id;
    std::string synth_request_id;
    bool postprocessed = false;
    bool metadata_missing = false;
};

struct ExplanationSample {
    QASample base;
    std::string visual_cues;
    std::string explanation;
    Provenance provenance;
};

enum class RegionCategory { Instrument, Polyp, Pseudo };

std::string_view to_string(RegionCategory c) noexcept;
std::optional<RegionCategory> parse_region_category(std::string_view s) noexcept;

struct RegionSample {
    std::string sample_id;
    std::string image_id;
    std::string answer_text;
    std::filesystem::path mask_path;  // relative to the regions file
    RegionCategory category = RegionCategory::Pseudo;
    std::vector<std::string> prompts_used;
    bool degenerate = false;
};

enum class ExampleSource { Vqa, Explanation, Region };

std::string_view to_string(ExampleSource s) noexcept;

struct MultiTaskExample {
    TaskToken task_token = TaskToken::MedVQA;
    std::string sample_id;
    std::string image_id;
    std::string input_text;
    std::string target_text;
    ExampleSource source = ExampleSource::Vqa;
};

// JSON field layouts of qa.jsonl / explanations.jsonl / regions.jsonl /
// multitask.jsonl. from_json throws Error(Parse) on missing or mistyped
// required fields.
nlohmann::json to_json(const QASample& s);
nlohmann::json to_json(const ExplanationSample& s);
nlohmann::json to_json(const RegionSample& s);
nlohmann::json to_json(const MultiTaskExample& s);

QASample qa_from_json(const nlohmann::json& j);
ExplanationSample explanation_from_json(const nlohmann::json& j);
RegionSample region_from_json(const nlohmann::json& j);
MultiTaskExample multitask_from_json(const nlohmann::json& j);

std::vector<QASample> load_qa(const std::filesystem::path& path);
std::vector<ExplanationSample> load_explanations(const std::filesystem::path& path);
std::vector<RegionSample> load_regions(const std::filesystem::path& path);
std::vector<MultiTaskExample> load_multitask(const std::filesystem::path& path);

template <typename T>
std::vector<nlohmann::json> to_json_lines(const std::vector<T>& items) {
    std::vector<nlohmann::json> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(to_json(it));
    return out;
}

// Stage entry in <dir>/manifest.json; other stages' entries are preserved.
// Contents carry no timestamps so identical runs write identical bytes.
void update_manifest(const std::filesystem::path& dir, const std::string& stage, const nlohmann::json& entry);

}  // namespace medvqa::forge
