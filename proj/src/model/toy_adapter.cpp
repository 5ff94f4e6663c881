#include "medvqa/model/toy_adapter.hpp"

#include <algorithm>
#include <cctype>

#include "medvqa/error.hpp"
#include "medvqa/forge/records.hpp"
#include "medvqa/util/files.hpp"
#include "medvqa/util/hash.hpp"

namespace medvqa::model {

std::vector<ToyToken> toy_tokenize(std::string_view text) {
    std::vector<ToyToken> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        if (text[i] == '<') {
            const std::size_t close = text.find('>', i);
            if (close != std::string_view::npos) {
                out.push_back({i, close + 1 - i});
                i = close + 1;
                continue;
            }
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) &&
               !(j > i && text[j] == '<'))
            ++j;
        out.push_back({i, j - i});
        i = j;
    }
    return out;
}

DecodingTrace toy_trace(std::string_view text, const std::vector<ToyToken>& tokens, const TraceProfile& profile,
                        int k) {
    DecodingTrace trace;
    trace.k = k;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const std::string token(text.substr(tokens[t].offset, tokens[t].length));
        std::vector<TokenProb> step;
        step.reserve(static_cast<std::size_t>(k));
        if (profile.kind == TraceProfile::Kind::Uniform) {
            const double p = 1.0 / std::max(profile.vocab, k);
            for (int i = 0; i < k; ++i) step.push_back({i == 0 ? token : "<alt_" + std::to_string(i) + ">", p});
        } else {
            // small deterministic wobble below the nominal peak
            const std::uint64_t h = util::fnv1a64(token, util::fnv1a64(text) + t);
            const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
            double top = profile.peak >= 1.0 ? 1.0 : profile.peak * (1.0 - 0.05 * u);
            top = std::clamp(top, 0.0, 1.0);
            step.push_back({token, top});
            double rest = 1.0 - top;
            for (int i = 1; i < k; ++i) {
                rest *= 0.5;
                step.push_back({"<alt_" + std::to_string(i) + ">", std::min(step.back().prob, rest)});
            }
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

ToyAdapter::ToyAdapter() : fallback_{"no answer", TraceProfile::peaked(0.2)} {}

void ToyAdapter::add(const std::string& image_id, TaskToken task, const std::string& input, std::string text,
                     TraceProfile profile) {
    std::lock_guard lock(mu_);
    table_[{image_id, task, input}] = {std::move(text), profile};
}

void ToyAdapter::set_fallback(std::string text, TraceProfile profile) {
    std::lock_guard lock(mu_);
    fallback_ = {std::move(text), profile};
}

std::size_t ToyAdapter::size() const {
    std::lock_guard lock(mu_);
    return table_.size();
}

std::optional<train::TrainConfig> ToyAdapter::last_config() const {
    std::lock_guard lock(mu_);
    return last_config_;
}

GenerationResult ToyAdapter::do_generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                                         const DecodeParams& params) {
    Entry entry;
    {
        std::lock_guard lock(mu_);
        auto it = table_.find({image.image_id, task, input_text});
        entry = it == table_.end() ? fallback_ : it->second;
    }
    auto tokens = toy_tokenize(entry.text);
    std::string text = entry.text;
    if (tokens.size() > static_cast<std::size_t>(params.max_tokens)) {
        tokens.resize(static_cast<std::size_t>(params.max_tokens));
        text = entry.text.substr(0, tokens.back().offset + tokens.back().length);
    }
    GenerationResult out;
    out.trace = toy_trace(text, tokens, entry.profile, params.top_k_record);
    out.text = std::move(text);
    return out;
}

RunHandle ToyAdapter::do_fine_tune(const FineTuneRequest& req) {
    std::vector<forge::MultiTaskExample> examples = forge::load_multitask(req.train_file);
    const auto val = forge::load_multitask(req.val_file);
    examples.insert(examples.end(), val.begin(), val.end());
    {
        std::lock_guard lock(mu_);
        for (const auto& e : examples) table_[{e.image_id, e.task_token, e.input_text}] = {e.target_text, {}};
        last_config_ = req.config;
    }
    RunHandle h;
    h.run_id = "toy-" + util::file_digest(req.train_file);
    h.details = {{"memorized", examples.size()}, {"effective_batch", req.config.effective_batch()}};
    if (!req.output_dir.empty()) {
        const auto ckpt = req.output_dir / kCheckpointName;
        save(ckpt);
        h.details["checkpoint"] = ckpt.string();
    }
    return h;
}

namespace {

nlohmann::json profile_json(const TraceProfile& p) {
    if (p.kind == TraceProfile::Kind::Uniform) return {{"kind", "uniform"}, {"vocab", p.vocab}};
    return {{"kind", "peaked"}, {"peak", p.peak}};
}

TraceProfile profile_from(const nlohmann::json& j) {
    if (j.value("kind", std::string("peaked")) == "uniform") return TraceProfile::uniform(j.value("vocab", 10));
    return TraceProfile::peaked(j.value("peak", 0.9));
}

}  // namespace

void ToyAdapter::save(const std::filesystem::path& path) const {
    nlohmann::json entries = nlohmann::json::array();
    nlohmann::json fallback;
    {
        std::lock_guard lock(mu_);
        for (const auto& [key, e] : table_) {
            const auto& [image_id, task, input] = key;
            entries.push_back({{"image_id", image_id},
                               {"task_token", to_string(task)},
                               {"input_text", input},
                               {"text", e.text},
                               {"profile", profile_json(e.profile)}});
        }
        fallback = {{"text", fallback_.text}, {"profile", profile_json(fallback_.profile)}};
    }
    util::write_file_atomic(path, nlohmann::json{{"backend", "toy"}, {"entries", entries}, {"fallback", fallback}}
                                          .dump(1) + "\n");
}

std::unique_ptr<ToyAdapter> ToyAdapter::load(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    auto out = std::make_unique<ToyAdapter>();
    try {
        for (const auto& e : j.at("entries")) {
            const auto task = parse_task_token(e.at("task_token").get<std::string>());
            if (!task) fail(ErrorKind::Parse, path.string() + ": unknown task token");
            out->add(e.at("image_id").get<std::string>(), *task, e.at("input_text").get<std::string>(),
                     e.at("text").get<std::string>(), profile_from(e.value("profile", nlohmann::json::object())));
        }
        if (j.contains("fallback"))
            out->set_fallback(j["fallback"].at("text").get<std::string>(),
                              profile_from(j["fallback"].value("profile", nlohmann::json::object())));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace medvqa::model
