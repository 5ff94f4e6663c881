#include "medvqa/forge/records.hpp"

#include <set>

#include "medvqa/error.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::forge {

using nlohmann::json;

std::string_view to_string(RegionCategory c) noexcept {
    switch (c) {
        case RegionCategory::Instrument: return "instrument";
        case RegionCategory::Polyp: return "polyp";
        case RegionCategory::Pseudo: return "pseudo";
    }
    return "";
}

std::optional<RegionCategory> parse_region_category(std::string_view s) noexcept {
    for (auto c : {RegionCategory::Instrument, RegionCategory::Polyp, RegionCategory::Pseudo})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::string_view to_string(ExampleSource s) noexcept {
    switch (s) {
        case ExampleSource::Vqa: return "vqa";
        case ExampleSource::Explanation: return "explanation";
        case ExampleSource::Region: return "region";
    }
    return "";
}

namespace {

std::string req_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string())
        fail(ErrorKind::Parse, std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

std::string opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    if (!j[key].is_string()) fail(ErrorKind::Parse, std::string("field '") + key + "' must be a string");
    return j[key].get<std::string>();
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

template <typename T, typename Fn>
std::vector<T> load_lines(const std::filesystem::path& path, Fn from) {
    std::vector<T> out;
    const auto lines = util::read_jsonl(path);
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            out.push_back(from(lines[i]));
        } catch (const Error& e) {
            throw Error(e.kind(), path.string() + ": record " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
void require_unique(const std::vector<T>& items, const std::filesystem::path& path) {
    std::set<std::string> seen;
    for (const auto& it : items)
        if (!seen.insert(it.sample_id).second)
            fail(ErrorKind::Contract, path.string() + ": duplicate sample_id '" + it.sample_id + "'");
}

}  // namespace

json to_json(const QASample& s) {
    return {{"sample_id", s.sample_id}, {"image_id", s.image_id},       {"question", s.question},
            {"answer", s.answer},       {"complexity", s.complexity}, {"metadata", s.metadata}};
}

json to_json(const ExplanationSample& s) {
    json prov{{"cue_request_id", s.provenance.cue_request_id},
              {"synth_request_id", s.provenance.synth_request_id},
              {"postprocessed", s.provenance.postprocessed}};
    if (s.provenance.metadata_missing) prov["metadata_missing"] = true;
    return {{"sample_id", s.base.sample_id}, {"image_id", s.base.image_id}, {"question", s.base.question},
            {"answer", s.base.answer},       {"complexity", s.base.complexity},
            {"metadata", s.base.metadata},   {"visual_cues", s.visual_cues},
            {"explanation", s.explanation},  {"provenance", prov}};
}

json to_json(const RegionSample& s) {
    return {{"sample_id", s.sample_id},
            {"image_id", s.image_id},
            {"answer_text", s.answer_text},
            {"mask_path", s.mask_path.generic_string()},
            {"category", to_string(s.category)},
            {"prompts_used", s.prompts_used},
            {"degenerate", s.degenerate}};
}

json to_json(const MultiTaskExample& s) {
    return {{"task_token", to_string(s.task_token)}, {"sample_id", s.sample_id},
            {"image_id", s.image_id},                {"input_text", s.input_text},
            {"target_text", s.target_text},          {"source", to_string(s.source)}};
}

QASample qa_from_json(const json& j) {
    QASample s;
    s.sample_id = req_string(j, "sample_id");
    s.image_id = req_string(j, "image_id");
    s.question = req_string(j, "question");
    s.answer = req_string(j, "answer");
    if (s.question.empty() || s.answer.empty()) fail(ErrorKind::Parse, "question and answer must be non-empty");
    if (j.contains("complexity")) {
        if (!j["complexity"].is_number_integer()) fail(ErrorKind::Parse, "complexity must be an integer");
        s.complexity = j["complexity"].get<int>();
    }
    if (s.complexity < 1) fail(ErrorKind::Parse, "complexity must be >= 1");
    if (j.contains("metadata") && !j["metadata"].is_null()) {
        if (!j["metadata"].is_object()) fail(ErrorKind::Parse, "metadata must be an object");
        for (const auto& [k, v] : j["metadata"].items())
            if (!v.is_null()) s.metadata[k] = scalar_text(v);
    }
    return s;
}

ExplanationSample explanation_from_json(const json& j) {
    ExplanationSample s;
    s.base = qa_from_json(j);
    s.visual_cues = opt_string(j, "visual_cues");
    s.explanation = req_string(j, "explanation");
    if (s.explanation.empty()) fail(ErrorKind::Parse, "explanation must be non-empty");
    if (j.contains("provenance") && j["provenance"].is_object()) {
        const auto& p = j["provenance"];
        s.provenance.cue_request_id = opt_string(p, "cue_request_id");
        s.provenance.synth_request_id = opt_string(p, "synth_request_id");
        s.provenance.postprocessed = p.value("postprocessed", false);
        s.provenance.metadata_missing = p.value("metadata_missing", false);
    }
    return s;
}

RegionSample region_from_json(const json& j) {
    RegionSample s;
    s.sample_id = req_string(j, "sample_id");
    s.image_id = req_string(j, "image_id");
    s.answer_text = opt_string(j, "answer_text");
    s.mask_path = req_string(j, "mask_path");
    const auto cat = parse_region_category(req_string(j, "category"));
    if (!cat) fail(ErrorKind::Parse, "category must be instrument, polyp or pseudo");
    s.category = *cat;
    if (j.contains("prompts_used")) s.prompts_used = j["prompts_used"].get<std::vector<std::string>>();
    s.degenerate = j.value("degenerate", false);
    return s;
}

MultiTaskExample multitask_from_json(const json& j) {
    MultiTaskExample s;
    const auto tok = parse_task_token(req_string(j, "task_token"));
    if (!tok) fail(ErrorKind::Parse, "unknown task_token '" + j["task_token"].get<std::string>() + "'");
    s.task_token = *tok;
    s.sample_id = opt_string(j, "sample_id");
    s.image_id = req_string(j, "image_id");
    s.input_text = req_string(j, "input_text");
    s.target_text = req_string(j, "target_text");
    const std::string src = req_string(j, "source");
    if (src == "vqa")
        s.source = ExampleSource::Vqa;
    else if (src == "explanation")
        s.source = ExampleSource::Explanation;
    else if (src == "region")
        s.source = ExampleSource::Region;
    else
        fail(ErrorKind::Parse, "unknown source '" + src + "'");
    return s;
}

std::vector<QASample> load_qa(const std::filesystem::path& path) {
    auto out = load_lines<QASample>(path, qa_from_json);
    require_unique(out, path);
    return out;
}

std::vector<ExplanationSample> load_explanations(const std::filesystem::path& path) {
    auto out = load_lines<ExplanationSample>(path, explanation_from_json);
    std::set<std::string> seen;
    for (const auto& e : out)
        if (!seen.insert(e.base.sample_id).second)
            fail(ErrorKind::Contract, path.string() + ": duplicate sample_id '" + e.base.sample_id + "'");
    return out;
}

std::vector<RegionSample> load_regions(const std::filesystem::path& path) {
    auto out = load_lines<RegionSample>(path, region_from_json);
    require_unique(out, path);
    return out;
}

std::vector<MultiTaskExample> load_multitask(const std::filesystem::path& path) {
    return load_lines<MultiTaskExample>(path, multitask_from_json);
}

void update_manifest(const std::filesystem::path& dir, const std::string& stage, const json& entry) {
    const auto path = dir / "manifest.json";
    json manifest = json::object();
    if (std::filesystem::exists(path)) {
        try {
            manifest = json::parse(util::read_file(path));
        } catch (const std::exception& e) {
            fail(ErrorKind::Parse, path.string() + ": " + e.what());
        }
    }
    manifest[stage] = entry;
    util::write_file_atomic(path, manifest.dump(2) + "\n");
}

}  // namespace medvqa::forge
