#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medvqa/forge/explanations.hpp"
#include "medvqa/forge/records.hpp"
#include "medvqa/gen/segmentation.hpp"
#include "medvqa/imaging/ops.hpp"

namespace medvqa::forge {

// Image that gets pseudo-masks from the text-conditioned segmenter. label
// keys the prompt table (e.g. "ulcerative colitis" -> {"red patches", ...}).
struct PseudoCase {
    std::string image_id;
    std::filesystem::path image_path;
    std::string label;
    std::string answer_text;  // empty: link from QA via the keyword map
};

// Curated mask supplied with its category (polyp or instrument).
struct ExternalMask {
    std::string image_id;
    std::filesystem::path mask_path;
    RegionCategory category = RegionCategory::Polyp;
    std::string answer_text;
};

using PromptTable = std::map<std::string, std::vector<std::string>>;

// Resolves which QA answer a mask belongs to. Keywords per key (a pseudo
// label or a category name) select the QA pairs on the same image whose
// question mentions any keyword. Exactly one distinct answer links;
// several distinct answers are reported as ambiguous rather than guessed.
class AnswerLinker {
public:
    enum class Status { Linked, Missing, Ambiguous };
    struct Result {
        Status status = Status::Missing;
        std::string answer;
    };

    AnswerLinker() = default;
    AnswerLinker(const std::vector<QASample>& qas, std::map<std::string, std::vector<std::string>> keywords);

    Result link(const std::string& image_id, const std::string& key) const;

private:
    std::multimap<std::string, std::size_t> by_image_;
    std::vector<QASample> storage_;
    std::map<std::string, std::vector<std::string>> keywords_;
};

struct RegionForgeOptions {
    double heatmap_thresh = 0.35;
    imaging::RefineOptions refine;
    // Masks are written to <output_dir>/masks/<sample_id>.png and recorded
    // relative to output_dir.
    std::filesystem::path output_dir;
};

struct RegionCounts {
    std::size_t pseudo = 0;
    std::size_t external = 0;
    std::size_t total = 0;
    std::size_t degenerate = 0;
    std::size_t skipped = 0;
    std::size_t ambiguous = 0;
};

struct RegionForgeResult {
    std::vector<RegionSample> samples;  // sorted by sample_id
    std::vector<SkippedSample> skipped;
    RegionCounts counts;
};

std::string pseudo_sample_id(const PseudoCase& c);
std::string external_sample_id(const ExternalMask& m);

// Pseudo cases: segment per prompt, threshold, union, refine (dark border
// then area), save. External masks are only normalized to 0/255 PNG.
// Unreadable inputs are skipped with a logged reason; empty refined masks
// are kept with degenerate = true.
RegionForgeResult build_region_samples(const std::vector<PseudoCase>& pseudo, const PromptTable& prompts,
                                       gen::SegClient& seg, const std::vector<ExternalMask>& external,
                                       const RegionForgeOptions& opts, const AnswerLinker* linker = nullptr);

nlohmann::json to_json(const RegionCounts& c);

// Error(Integrity) unless pseudo + external == total in a manifest entry
// carrying {pseudo_count, external_count, region_total}.
void check_region_counts(const nlohmann::json& entry);

}  // namespace medvqa::forge
