#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "medvqa/forge/records.hpp"
#include "medvqa/gen/text_gen.hpp"

namespace medvqa::forge {

// Prompt text for both generation stages. Placeholders {question},
// {answer}, {metadata} and {cues} are substituted; a template line that
// mentions {metadata} is dropped entirely when the sample has none.
struct PromptTemplates {
    std::string cue_system;
    std::string cue_user;
    std::string synth_system;
    std::string synth_user;
    std::vector<gen::FewShotExample> few_shots;
    int max_tokens = 512;
    double temperature = 0.2;

    static PromptTemplates defaults();
    // Reads cue_system.txt, cue_user.txt, synth_system.txt, synth_user.txt
    // and few_shot.jsonl ({input, output} per line). Missing files keep the
    // built-in default for that slot.
    static PromptTemplates from_directory(const std::filesystem::path& dir);
};

std::string render_metadata(const std::map<std::string, std::string>& metadata);
std::string expand_template(const std::string& tmpl, const std::map<std::string, std::string>& vars);

gen::TextGenRequest cue_request(const QASample& qa, const PromptTemplates& t);
gen::TextGenRequest synthesis_request(const QASample& qa, const std::string& cues, const PromptTemplates& t);

struct CueResult {
    std::string text;
    std::string request_id;
    bool metadata_missing = false;
};

CueResult build_visual_cues(const QASample& qa, gen::TextGenClient& client, const PromptTemplates& t);

inline constexpr std::string_view kComplexitySkipReason = "explanations target complexity-1";

// Raw (not yet post-processed) explanation. Error(Contract) if cues are
// empty or the sample's complexity is not 1.
ExplanationSample synthesize_explanation(const QASample& qa, const CueResult& cues,
                                         gen::TextGenClient& client, const PromptTemplates& t);

struct SkippedSample {
    std::string sample_id;
    std::string reason;
};

struct ExplanationForgeResult {
    std::vector<ExplanationSample> samples;  // sorted by sample_id
    std::vector<SkippedSample> skipped;      // sorted by sample_id
};

// Both stages plus post-processing for every complexity-1 sample. Samples
// are forged concurrently; client errors propagate (first failing sample
// in id order).
ExplanationForgeResult forge_explanations(const std::vector<QASample>& qas, gen::TextGenClient& client,
                                          const PromptTemplates& t);

}  // namespace medvqa::forge
