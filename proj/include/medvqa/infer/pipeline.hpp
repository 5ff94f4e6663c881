#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medvqa/imaging/binary_mask.hpp"
#include "medvqa/infer/confidence.hpp"
#include "medvqa/model/adapter.hpp"

namespace medvqa::infer {

struct InferOptions {
    model::DecodeParams decode{};
    int confidence_k = 5;
    ConfidenceMode confidence_mode = ConfidenceMode::TopKMass;
};

struct Generated {
    std::string text;
    model::DecodingTrace trace;
};

// <MedVQA> with the question as input. Error(Contract) on an empty question.
Generated answer_question(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& question,
                          const InferOptions& opts = {});

struct Grounding {
    std::optional<imaging::BinaryMask> mask;
    model::DecodingTrace trace;
    std::string raw_text;
};

// <REFERRING_EXPRESSION_SEGMENTATION> with the answer text; the output is
// parsed to location tokens and rasterized at the image size. Unparseable or
// out-of-range output is a soft miss (mask absent, warning logged); only
// backend failures throw.
Grounding ground_answer(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& answer_text,
                        int width, int height, const InferOptions& opts = {});

// <MedVQA_EXPLAIN> with "<question> Explain in detail" (suffix not doubled).
Generated explain(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& question,
                  const InferOptions& opts = {});

enum class Stage { Answer, Ground, Explain };
std::string_view to_string(Stage s) noexcept;

struct StageTrace {
    Stage stage;
    model::DecodingTrace trace;
};

struct GroundedAnswer {
    std::string question;
    std::string answer;
    std::optional<imaging::BinaryMask> mask;
    std::optional<std::string> explanation;
    std::optional<double> confidence;  // from the explanation trace only
    std::vector<StageTrace> traces;    // one per executed stage, in order
    std::optional<Stage> failure_stage;
    std::string failure_message;
};

// answer -> ground(predicted answer) -> explain -> confidence. A failure in
// the answer stage throws; a backend failure in a later stage stops the
// pipeline and is recorded in failure_stage.
GroundedAnswer run_subtask2(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& question,
                            int width, int height, const InferOptions& opts = {});

// Batch driver over a question file
// ({sample_id, image_id, question} per line; images looked up by id).
struct InferenceItem {
    std::string sample_id;
    std::string image_id;
    std::string question;
};

std::vector<InferenceItem> load_inference_items(const std::filesystem::path& path);

// Writes <out_dir>/predictions.jsonl (sorted by sample_id) and, for subtask
// 2, <out_dir>/masks/<sample_id>.png. Items run concurrently.
struct BatchSummary {
    std::size_t total = 0;
    std::size_t masks = 0;
    std::size_t failures = 0;
};

BatchSummary run_batch(model::ModelAdapter& adapter, int subtask, const std::vector<InferenceItem>& items,
                       const std::filesystem::path& image_dir, const std::filesystem::path& out_dir,
                       const InferOptions& opts = {});

}  // namespace medvqa::infer
