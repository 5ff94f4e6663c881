#include "medvqa/forge/regions.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <set>

#include <spdlog/spdlog.h>

#include "medvqa/error.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/parallel.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::forge {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string slug(const std::string& s) {
    std::string out;
    for (char c : lower(s)) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += c;
        else if (!out.empty() && out.back() != '-')
            out += '-';
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "x" : out;
}

}  // namespace

AnswerLinker::AnswerLinker(const std::vector<QASample>& qas, std::map<std::string, std::vector<std::string>> keywords)
    : storage_(qas), keywords_(std::move(keywords)) {
    for (std::size_t i = 0; i < storage_.size(); ++i) by_image_.emplace(storage_[i].image_id, i);
}

AnswerLinker::Result AnswerLinker::link(const std::string& image_id, const std::string& key) const {
    Result out;
    auto kw = keywords_.find(key);
    if (kw == keywords_.end()) return out;
    std::set<std::string> answers;
    auto [lo, hi] = by_image_.equal_range(image_id);
    for (auto it = lo; it != hi; ++it) {
        const QASample& qa = storage_[it->second];
        const std::string q = lower(qa.question);
        for (const auto& word : kw->second)
            if (q.find(lower(word)) != std::string::npos) {
                answers.insert(qa.answer);
                break;
            }
    }
    if (answers.size() == 1) {
        out.status = Status::Linked;
        out.answer = *answers.begin();
    } else if (answers.size() > 1) {
        out.status = Status::Ambiguous;
    }
    return out;
}

std::string pseudo_sample_id(const PseudoCase& c) { return c.image_id + "__pseudo__" + slug(c.label); }

std::string external_sample_id(const ExternalMask& m) {
    return m.image_id + "__" + std::string(to_string(m.category));
}

namespace {

struct Outcome {
    std::optional<RegionSample> sample;
    std::string skip_reason;
    bool ambiguous = false;
    std::exception_ptr error;
};

// Returns the answer text or sets a skip reason.
std::optional<std::string> resolve_answer(const std::string& given, const std::string& image_id,
                                          const std::string& key, const AnswerLinker* linker, Outcome& out) {
    if (!given.empty()) return given;
    if (!linker) {
        out.skip_reason = "no answer text and no answer linker";
        return std::nullopt;
    }
    const auto res = linker->link(image_id, key);
    switch (res.status) {
        case AnswerLinker::Status::Linked: return res.answer;
        case AnswerLinker::Status::Ambiguous:
            out.ambiguous = true;
            out.skip_reason = "ambiguous answer link for '" + key + "'";
            return std::nullopt;
        case AnswerLinker::Status::Missing:
            out.skip_reason = "no linked answer for '" + key + "'";
            return std::nullopt;
    }
    return std::nullopt;
}

fs::path mask_rel(const std::string& sample_id) { return fs::path("masks") / (sample_id + ".png"); }

Outcome forge_pseudo(const PseudoCase& c, const PromptTable& prompts, gen::SegClient& seg,
                     const RegionForgeOptions& opts, const AnswerLinker* linker) {
    Outcome out;
    auto answer = resolve_answer(c.answer_text, c.image_id, c.label, linker, out);
    if (!answer) return out;
    auto pt = prompts.find(c.label);
    if (pt == prompts.end() || pt->second.empty()) {
        out.skip_reason = "no prompts for label '" + c.label + "'";
        return out;
    }
    std::string bytes;
    imaging::GrayImage frame;
    try {
        bytes = util::read_file(c.image_path);
        frame = imaging::decode_png(bytes);
    } catch (const Error& e) {
        out.skip_reason = std::string("unreadable image: ") + e.what();
        return out;
    }

    std::vector<imaging::BinaryMask> masks;
    for (const auto& prompt : pt->second) {
        gen::SegRequest req{c.image_id, c.image_path, bytes, frame.width, frame.height, prompt};
        masks.push_back(imaging::threshold_heatmap(seg.segment_by_text(req), opts.heatmap_thresh));
    }
    const imaging::BinaryMask merged = imaging::union_masks(masks);
    const imaging::BinaryMask refined = imaging::refine_mask(merged, frame, opts.refine);

    RegionSample s;
    s.sample_id = pseudo_sample_id(c);
    s.image_id = c.image_id;
    s.answer_text = *answer;
    s.mask_path = mask_rel(s.sample_id);
    s.category = RegionCategory::Pseudo;
    s.prompts_used = pt->second;
    s.degenerate = refined.empty();
    imaging::write_mask(opts.output_dir / s.mask_path, refined);
    out.sample = std::move(s);
    return out;
}

Outcome forge_external(const ExternalMask& m, const RegionForgeOptions& opts, const AnswerLinker* linker) {
    Outcome out;
    auto answer = resolve_answer(m.answer_text, m.image_id, std::string(to_string(m.category)), linker, out);
    if (!answer) return out;
    imaging::BinaryMask mask(1, 1);
    try {
        mask = imaging::read_mask(m.mask_path);
    } catch (const Error& e) {
        out.skip_reason = std::string("unreadable mask: ") + e.what();
        return out;
    }
    RegionSample s;
    s.sample_id = external_sample_id(m);
    s.image_id = m.image_id;
    s.answer_text = *answer;
    s.mask_path = mask_rel(s.sample_id);
    s.category = m.category;
    s.degenerate = mask.empty();
    imaging::write_mask(opts.output_dir / s.mask_path, mask);
    out.sample = std::move(s);
    return out;
}

}  // namespace

RegionForgeResult build_region_samples(const std::vector<PseudoCase>& pseudo, const PromptTable& prompts,
                                       gen::SegClient& seg, const std::vector<ExternalMask>& external,
                                       const RegionForgeOptions& opts, const AnswerLinker* linker) {
    if (!pseudo.empty() && prompts.empty()) fail(ErrorKind::Contract, "prompt table is empty");
    for (const auto& m : external)
        if (m.category == RegionCategory::Pseudo)
            fail(ErrorKind::Contract, "external mask " + m.image_id + " cannot have category pseudo");

    const std::size_t n = pseudo.size() + external.size();
    std::vector<Outcome> outcomes(n);
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < pseudo.size(); ++i) ids[i] = pseudo_sample_id(pseudo[i]);
    for (std::size_t i = 0; i < external.size(); ++i) ids[pseudo.size() + i] = external_sample_id(external[i]);
    {
        std::set<std::string> seen;
        for (const auto& id : ids)
            if (!seen.insert(id).second) fail(ErrorKind::Contract, "duplicate region sample id " + id);
    }

    parallel::for_each_index(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            outcomes[i] = i < pseudo.size() ? forge_pseudo(pseudo[i], prompts, seg, opts, linker)
                                            : forge_external(external[i - pseudo.size()], opts, linker);
        } catch (...) {
            outcomes[i].error = std::current_exception();
        }
    });

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

    RegionForgeResult out;
    for (std::size_t i : order) {
        Outcome& o = outcomes[i];
        if (o.error) std::rethrow_exception(o.error);
        if (!o.sample) {
            spdlog::warn("region sample {} skipped: {}", ids[i], o.skip_reason);
            out.skipped.push_back({ids[i], o.skip_reason});
            ++out.counts.skipped;
            if (o.ambiguous) ++out.counts.ambiguous;
            continue;
        }
        if (o.sample->category == RegionCategory::Pseudo)
            ++out.counts.pseudo;
        else
            ++out.counts.external;
        if (o.sample->degenerate) ++out.counts.degenerate;
        out.samples.push_back(std::move(*o.sample));
    }
    out.counts.total = out.samples.size();
    return out;
}

nlohmann::json to_json(const RegionCounts& c) {
    return {{"pseudo_count", c.pseudo},         {"external_count", c.external}, {"region_total", c.total},
            {"degenerate_count", c.degenerate}, {"skipped_count", c.skipped},   {"ambiguous_count", c.ambiguous}};
}

void check_region_counts(const nlohmann::json& entry) {
    for (const char* key : {"pseudo_count", "external_count", "region_total"})
        if (!entry.contains(key) || !entry[key].is_number_integer() || entry[key].get<std::int64_t>() < 0)
            fail(ErrorKind::Integrity, std::string("region manifest lacks a count '") + key + "'");
    const auto pseudo = entry["pseudo_count"].get<std::uint64_t>();
    const auto external = entry["external_count"].get<std::uint64_t>();
    const auto total = entry["region_total"].get<std::uint64_t>();
    if (pseudo + external != total)
        fail(ErrorKind::Integrity, "region manifest: pseudo_count " + std::to_string(pseudo) + " + external_count " +
                                       std::to_string(external) + " != region_total " + std::to_string(total));
}

}  // namespace medvqa::forge
