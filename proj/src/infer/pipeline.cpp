#include "medvqa/infer/pipeline.hpp"

#include <algorithm>
#include <exception>

#include <spdlog/spdlog.h>

#include "medvqa/codec/loc_tokens.hpp"
#include "medvqa/error.hpp"
#include "medvqa/forge/assemble.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/parallel.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::infer {

namespace fs = std::filesystem;

std::string_view to_string(Stage s) noexcept {
    switch (s) {
        case Stage::Answer: return "answer";
        case Stage::Ground: return "ground";
        case Stage::Explain: return "explain";
    }
    return "";
}

Generated answer_question(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& question,
                          const InferOptions& opts) {
    if (question.find_first_not_of(" \t\r\n") == std::string::npos)
        fail(ErrorKind::Contract, "answer_question: empty question");
    auto res = adapter.generate(image, TaskToken::MedVQA, question, opts.decode);
    return {std::move(res.text), std::move(res.trace)};
}

Grounding ground_answer(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& answer_text,
                        int width, int height, const InferOptions& opts) {
    if (answer_text.empty()) fail(ErrorKind::Contract, "ground_answer: empty answer text");
    auto res = adapter.generate(image, TaskToken::ReferringSegmentation, answer_text, opts.decode);
    Grounding out;
    out.trace = std::move(res.trace);
    out.raw_text = std::move(res.text);
    try {
        out.mask = codec::tokens_to_mask(codec::parse_token_text(out.raw_text), width, height);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Parse && e.kind() != ErrorKind::Range) throw;
        spdlog::warn("grounding for image {} gave no usable region: {}", image.image_id, e.what());
    }
    return out;
}

Generated explain(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& question,
                  const InferOptions& opts) {
    if (question.find_first_not_of(" \t\r\n") == std::string::npos)
        fail(ErrorKind::Contract, "explain: empty question");
    auto res = adapter.generate(image, TaskToken::MedVQAExplain, forge::explain_input(question), opts.decode);
    return {std::move(res.text), std::move(res.trace)};
}

GroundedAnswer run_subtask2(model::ModelAdapter& adapter, const model::ImageRef& image, const std::string& question,
                            int width, int height, const InferOptions& opts) {
    GroundedAnswer out;
    out.question = question;
    Generated answer = answer_question(adapter, image, question, opts);
    out.answer = answer.text;
    out.traces.push_back({Stage::Answer, std::move(answer.trace)});

    auto record_failure = [&](Stage stage, const std::exception& e) {
        out.failure_stage = stage;
        out.failure_message = e.what();
        spdlog::warn("image {}: stage {} failed: {}", image.image_id, to_string(stage), e.what());
    };

    try {
        if (!out.answer.empty()) {
            Grounding g = ground_answer(adapter, image, out.answer, width, height, opts);
            out.mask = std::move(g.mask);
            out.traces.push_back({Stage::Ground, std::move(g.trace)});
        }
    } catch (const std::exception& e) {
        record_failure(Stage::Ground, e);
        return out;
    }

    try {
        Generated ex = explain(adapter, image, question, opts);
        const double conf = confidence(ex.trace, opts.confidence_k, opts.confidence_mode);
        out.explanation = std::move(ex.text);
        out.confidence = conf;
        out.traces.push_back({Stage::Explain, std::move(ex.trace)});
    } catch (const std::exception& e) {
        record_failure(Stage::Explain, e);
    }
    return out;
}

std::vector<InferenceItem> load_inference_items(const fs::path& path) {
    std::vector<InferenceItem> out;
    const auto lines = util::read_jsonl(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& j = lines[i];
        if (!j.contains("sample_id") || !j.contains("image_id") || !j.contains("question"))
            fail(ErrorKind::Parse, path.string() + ": record " + std::to_string(i + 1) +
                                       " needs sample_id, image_id and question");
        out.push_back({j["sample_id"].get<std::string>(), j["image_id"].get<std::string>(),
                       j["question"].get<std::string>()});
    }
    return out;
}

BatchSummary run_batch(model::ModelAdapter& adapter, int subtask, const std::vector<InferenceItem>& items,
                       const fs::path& image_dir, const fs::path& out_dir, const InferOptions& opts) {
    if (subtask != 1 && subtask != 2) fail(ErrorKind::Contract, "subtask must be 1 or 2");
    const auto index = forge::ImageIndex::from_directory(image_dir);
    std::vector<nlohmann::json> records(items.size());
    std::vector<char> has_mask(items.size(), 0);
    std::vector<char> failed(items.size(), 0);

    parallel::for_each_index(static_cast<std::ptrdiff_t>(items.size()), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        const InferenceItem& item = items[i];
        nlohmann::json rec{{"sample_id", item.sample_id}, {"question", item.question}};
        try {
            const auto path = index.find(item.image_id);
            if (!path) fail(ErrorKind::Io, "no image for id " + item.image_id);
            const model::ImageRef image{item.image_id, *path};
            if (subtask == 1) {
                rec["answer"] = answer_question(adapter, image, item.question, opts).text;
            } else {
                const auto frame = imaging::read_png(*path);
                const GroundedAnswer ga = run_subtask2(adapter, image, item.question, frame.width, frame.height, opts);
                rec["answer"] = ga.answer;
                if (ga.mask) {
                    const fs::path rel = fs::path("masks") / (item.sample_id + ".png");
                    imaging::write_mask(out_dir / rel, *ga.mask);
                    rec["mask_path"] = rel.generic_string();
                    has_mask[i] = 1;
                }
                if (ga.explanation) rec["explanation"] = *ga.explanation;
                if (ga.confidence) rec["confidence"] = *ga.confidence;
                if (ga.failure_stage) {
                    rec["failure_stage"] = to_string(*ga.failure_stage);
                    failed[i] = 1;
                }
            }
        } catch (const std::exception& e) {
            spdlog::error("sample {}: {}", item.sample_id, e.what());
            rec["answer"] = "";
            rec["failure_stage"] = "answer";
            failed[i] = 1;
        }
        records[i] = std::move(rec);
    });

    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return items[a].sample_id < items[b].sample_id; });
    std::vector<nlohmann::json> sorted;
    BatchSummary summary;
    for (std::size_t i : order) {
        sorted.push_back(std::move(records[i]));
        summary.masks += has_mask[i];
        summary.failures += failed[i];
    }
    summary.total = items.size();
    util::write_jsonl(out_dir / "predictions.jsonl", sorted);
    return summary;
}

}  // namespace medvqa::infer
