#include "medvqa/forge/assemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <set>

#include "medvqa/error.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/parallel.hpp"

namespace medvqa::forge {

namespace fs = std::filesystem;

ImageIndex ImageIndex::from_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::Io, "image directory not found: " + dir.string());
    ImageIndex idx;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") idx.add(entry.path().stem().string(), entry.path());
    }
    return idx;
}

void ImageIndex::add(std::string image_id, fs::path path) { paths_[std::move(image_id)] = std::move(path); }

std::optional<fs::path> ImageIndex::find(const std::string& image_id) const {
    auto it = paths_.find(image_id);
    if (it == paths_.end()) return std::nullopt;
    return it->second;
}

std::string explain_input(const std::string& question) {
    std::string q = question;
    while (!q.empty() && std::isspace(static_cast<unsigned char>(q.back()))) q.pop_back();
    std::string bare = q;
    if (!bare.empty() && bare.back() == '.') bare.pop_back();
    if (bare.size() >= kExplainSuffix.size() &&
        bare.compare(bare.size() - kExplainSuffix.size(), kExplainSuffix.size(), kExplainSuffix) == 0)
        return q;
    return q + " " + std::string(kExplainSuffix);
}

AssembleResult assemble_multitask(const std::vector<QASample>& vqa, const std::vector<ExplanationSample>& expl,
                                  const std::vector<RegionSample>& regions, const ImageIndex& images,
                                  const AssembleOptions& opts) {
    std::set<std::string> missing;
    auto check = [&](const std::string& id) {
        if (!images.find(id)) missing.insert(id);
    };
    for (const auto& s : vqa) check(s.image_id);
    for (const auto& s : expl) check(s.base.image_id);
    for (const auto& s : regions)
        if (!s.degenerate) check(s.image_id);
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        fail(ErrorKind::Contract, "assemble: missing images: " + list);
    }

    AssembleResult out;
    for (const auto& s : vqa) {
        out.examples.push_back({TaskToken::MedVQA, s.sample_id, s.image_id, s.question, s.answer, ExampleSource::Vqa});
        ++out.counts.vqa;
    }
    for (const auto& s : expl) {
        out.examples.push_back({TaskToken::MedVQAExplain, s.base.sample_id, s.base.image_id,
                                explain_input(s.base.question), s.explanation, ExampleSource::Explanation});
        ++out.counts.explanation;
    }

    std::vector<const RegionSample*> live;
    for (const auto& s : regions) {
        if (s.degenerate)
            ++out.counts.degenerate_excluded;
        else
            live.push_back(&s);
    }
    std::vector<std::string> targets(live.size());
    std::vector<std::exception_ptr> errors(live.size());
    parallel::for_each_index(static_cast<std::ptrdiff_t>(live.size()), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            const auto mask = imaging::read_mask(opts.regions_base / live[i]->mask_path);
            targets[i] = codec::render_tokens(codec::mask_to_tokens(mask, opts.simplify_eps, opts.num_bins));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.examples.push_back({TaskToken::ReferringSegmentation, live[i]->sample_id, live[i]->image_id,
                                live[i]->answer_text, targets[i], ExampleSource::Region});
        ++out.counts.region;
    }

    std::stable_sort(out.examples.begin(), out.examples.end(), [](const auto& a, const auto& b) {
        const auto ta = to_string(a.task_token);
        const auto tb = to_string(b.task_token);
        if (ta != tb) return ta < tb;
        return a.sample_id < b.sample_id;
    });
    return out;
}

nlohmann::json to_json(const AssembleCounts& c) {
    return {{"vqa_count", c.vqa},
            {"explanation_count", c.explanation},
            {"region_count", c.region},
            {"degenerate_excluded", c.degenerate_excluded},
            {"total", c.vqa + c.explanation + c.region}};
}

SplitResult group_split(const std::vector<MultiTaskExample>& examples, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorKind::Range, "split ratio must be in (0,1)");
    std::set<std::string> unique;
    for (const auto& e : examples) unique.insert(e.image_id);
    if (unique.size() < 2) fail(ErrorKind::Contract, "split needs at least 2 unique image ids");

    std::vector<std::string> ids(unique.begin(), unique.end());
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit bounded draw: std::shuffle's output is
    // library-specific and splits must match across toolchains.
    for (std::size_t i = ids.size() - 1; i > 0; --i) {
        const std::uint64_t bound = i + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do r = rng();
        while (r >= limit);
        std::swap(ids[i], ids[static_cast<std::size_t>(r % bound)]);
    }

    const auto n = ids.size();
    const auto n_train = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    if (n_train >= n) fail(ErrorKind::Contract, "validation empty: ratio leaves no image ids for validation");
    if (n_train == 0) fail(ErrorKind::Contract, "train empty: ratio leaves no image ids for training");

    SplitResult out;
    out.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
    std::sort(out.train_ids.begin(), out.train_ids.end());
    std::sort(out.val_ids.begin(), out.val_ids.end());
    const std::set<std::string> train_set(out.train_ids.begin(), out.train_ids.end());
    for (const auto& e : examples) (train_set.count(e.image_id) ? out.train : out.val).push_back(e);
    return out;
}

}  // namespace medvqa::forge
