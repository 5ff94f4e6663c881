#include "medvqa/forge/explanations.hpp"

#include <algorithm>
#include <exception>
#include <sstream>

#include <spdlog/spdlog.h>

#include "medvqa/error.hpp"
#include "medvqa/forge/postprocess.hpp"
#include "medvqa/parallel.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::forge {

namespace fs = std::filesystem;

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.cue_system =
        "You describe what can be seen in gastrointestinal endoscopy images for a general audience. "
        "Mention only observable features such as shape, size, colour, texture and position. "
        "Do not use medical terminology or diagnostic names.";
    t.cue_user =
        "Question: {question}\n"
        "Answer: {answer}\n"
        "Known findings: {metadata}\n"
        "In one or two sentences, describe the visual cues in the image that support this answer.";
    t.synth_system =
        "You write clear, well-structured explanations for answers to questions about gastrointestinal "
        "endoscopy images. Combine the known findings, the visual description and the answer into one "
        "short paragraph that justifies the answer. Follow the style of the examples.";
    t.synth_user =
        "Question: {question}\n"
        "Answer: {answer}\n"
        "Known findings: {metadata}\n"
        "Visual description: {cues}\n"
        "Write the explanation.";
    t.few_shots = {
        {"Question: Is there a polyp in the image?\nAnswer: yes\nKnown findings: abnormality: polyp; location: "
         "lower-left\nVisual description: a rounded, raised bump with a smooth pinkish surface sits in the "
         "lower left of the view.\nWrite the explanation.",
         "Yes, a polyp is present. A rounded, raised growth with a smooth pinkish surface stands out from the "
         "surrounding lining in the lower left of the image, which is the typical appearance of a polyp."},
        {"Question: How many instruments are visible?\nAnswer: one\nKnown findings: instrument: biopsy "
         "forceps\nVisual description: a single thin metallic tool enters from the right edge.\nWrite the "
         "explanation.",
         "One instrument is visible. A single thin metallic tool, consistent with biopsy forceps, enters the "
         "field of view from the right edge and no other tools can be seen."},
    };
    return t;
}

PromptTemplates PromptTemplates::from_directory(const fs::path& dir) {
    PromptTemplates t = defaults();
    auto slot = [&](const char* name, std::string& dst) {
        const auto p = dir / name;
        if (fs::exists(p)) {
            dst = util::read_file(p);
            while (!dst.empty() && (dst.back() == '\n' || dst.back() == '\r')) dst.pop_back();
        }
    };
    slot("cue_system.txt", t.cue_system);
    slot("cue_user.txt", t.cue_user);
    slot("synth_system.txt", t.synth_system);
    slot("synth_user.txt", t.synth_user);
    const auto shots = dir / "few_shot.jsonl";
    if (fs::exists(shots)) {
        t.few_shots.clear();
        for (const auto& j : util::read_jsonl(shots)) {
            if (!j.contains("input") || !j.contains("output"))
                fail(ErrorKind::Parse, shots.string() + ": few-shot lines need input and output");
            t.few_shots.push_back({j["input"].get<std::string>(), j["output"].get<std::string>()});
        }
    }
    return t;
}

std::string render_metadata(const std::map<std::string, std::string>& metadata) {
    std::string out;
    for (const auto& [k, v] : metadata) {
        if (!out.empty()) out += "; ";
        out += k + ": " + v;
    }
    return out;
}

std::string expand_template(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i);
            if (close != std::string::npos) {
                auto it = vars.find(tmpl.substr(i + 1, close - i - 1));
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

namespace {

std::string drop_metadata_lines(const std::string& tmpl) {
    std::istringstream in(tmpl);
    std::string line;
    std::string out;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find("{metadata}") != std::string::npos) continue;
        if (!first) out += '\n';
        out += line;
        first = false;
    }
    return out;
}

std::string fill(const std::string& tmpl, const QASample& qa, const std::string& cues) {
    const bool has_meta = !qa.metadata.empty();
    return expand_template(has_meta ? tmpl : drop_metadata_lines(tmpl),
                           {{"question", qa.question},
                            {"answer", qa.answer},
                            {"metadata", render_metadata(qa.metadata)},
                            {"cues", cues}});
}

}  // namespace

gen::TextGenRequest cue_request(const QASample& qa, const PromptTemplates& t) {
    gen::TextGenRequest req;
    req.system_prompt = t.cue_system;
    req.user_prompt = fill(t.cue_user, qa, "");
    req.max_tokens = t.max_tokens;
    req.temperature = t.temperature;
    return req;
}

gen::TextGenRequest synthesis_request(const QASample& qa, const std::string& cues, const PromptTemplates& t) {
    gen::TextGenRequest req;
    req.system_prompt = t.synth_system;
    req.few_shot_examples = t.few_shots;
    req.user_prompt = fill(t.synth_user, qa, cues);
    req.max_tokens = t.max_tokens;
    req.temperature = t.temperature;
    return req;
}

CueResult build_visual_cues(const QASample& qa, gen::TextGenClient& client, const PromptTemplates& t) {
    const auto res = client.generate_text(cue_request(qa, t));
    CueResult out;
    out.text = res.text;
    while (!out.text.empty() && std::isspace(static_cast<unsigned char>(out.text.back()))) out.text.pop_back();
    out.request_id = res.request_id;
    out.metadata_missing = qa.metadata.empty();
    if (out.text.empty()) fail(ErrorKind::Content, "empty visual cues for " + qa.sample_id);
    return out;
}

ExplanationSample synthesize_explanation(const QASample& qa, const CueResult& cues, gen::TextGenClient& client,
                                         const PromptTemplates& t) {
    if (qa.complexity != 1)
        fail(ErrorKind::Contract, qa.sample_id + ": " + std::string(kComplexitySkipReason));
    if (cues.text.empty()) fail(ErrorKind::Contract, qa.sample_id + ": visual cues are empty");
    const auto res = client.generate_text(synthesis_request(qa, cues.text, t));
    ExplanationSample out;
    out.base = qa;
    out.visual_cues = cues.text;
    out.explanation = res.text;
    out.provenance.cue_request_id = cues.request_id;
    out.provenance.synth_request_id = res.request_id;
    out.provenance.metadata_missing = cues.metadata_missing;
    return out;
}

ExplanationForgeResult forge_explanations(const std::vector<QASample>& qas, gen::TextGenClient& client,
                                          const PromptTemplates& t) {
    struct Slot {
        std::optional<ExplanationSample> sample;
        std::string skip_reason;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(qas.size());
    parallel::for_each_index(static_cast<std::ptrdiff_t>(qas.size()), [&](std::ptrdiff_t i) {
        const QASample& qa = qas[static_cast<std::size_t>(i)];
        Slot& slot = slots[static_cast<std::size_t>(i)];
        if (qa.complexity != 1) {
            slot.skip_reason = std::string(kComplexitySkipReason);
            return;
        }
        try {
            const CueResult cues = build_visual_cues(qa, client, t);
            ExplanationSample s = synthesize_explanation(qa, cues, client, t);
            s.explanation = postprocess_explanation(s.explanation);
            s.provenance.postprocessed = true;
            if (s.explanation.empty())
                slot.skip_reason = "empty explanation after post-processing";
            else
                slot.sample = std::move(s);
        } catch (...) {
            slot.error = std::current_exception();
        }
    });

    std::vector<std::size_t> order(qas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return qas[a].sample_id < qas[b].sample_id; });

    ExplanationForgeResult out;
    for (std::size_t i : order) {
        if (slots[i].error) std::rethrow_exception(slots[i].error);
        if (slots[i].sample) {
            out.samples.push_back(std::move(*slots[i].sample));
        } else {
            spdlog::info("skipping {}: {}", qas[i].sample_id, slots[i].skip_reason);
            out.skipped.push_back({qas[i].sample_id, slots[i].skip_reason});
        }
    }
    return out;
}

}  // namespace medvqa::forge
