#include "medvqa/cli/app.hpp"

#include <algorithm>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "medvqa/cli/config.hpp"
#include "medvqa/codec/loc_tokens.hpp"
#include "medvqa/eval/report.hpp"
#include "medvqa/forge/assemble.hpp"
#include "medvqa/forge/explanations.hpp"
#include "medvqa/forge/records.hpp"
#include "medvqa/forge/regions.hpp"
#include "medvqa/gen/mock.hpp"
#include "medvqa/gen/segmentation.hpp"
#include "medvqa/gen/text_gen.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/infer/pipeline.hpp"
#include "medvqa/model/http_adapter.hpp"
#include "medvqa/model/toy_adapter.hpp"
#include "medvqa/parallel.hpp"
#include "medvqa/train/harness.hpp"
#include "medvqa/util/files.hpp"
#include "medvqa/util/hash.hpp"

namespace medvqa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::Contract:
        case ErrorKind::Parse:
        case ErrorKind::Range:
        case ErrorKind::Dimension: return kExitValidation;
        default: return kExitRuntime;
    }
}

namespace {

// Steps and output files a command would produce; printed by --dry-run.
struct Plan {
    std::vector<std::string> steps;
    std::vector<fs::path> writes;

    void print(std::ostream& out, const std::string& command) const {
        out << "plan for " << command << ":\n";
        for (const auto& s : steps) out << "  - " << s << "\n";
        for (const auto& w : writes) out << "  would write " << w.string() << "\n";
    }
};

struct Context {
    PipelineConfig config;
    bool dry_run = false;
    std::ostream* out = nullptr;
};

void require_file(const fs::path& p, const std::string& what) {
    if (p.empty()) fail(ErrorKind::Contract, what + " is required");
    if (!fs::is_regular_file(p)) fail(ErrorKind::Contract, what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
    if (p.empty()) fail(ErrorKind::Contract, what + " is required");
    if (!fs::is_directory(p)) fail(ErrorKind::Contract, what + " is not a directory: " + p.string());
}

json read_json_file(const fs::path& p) {
    try {
        return json::parse(util::read_file(p));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Parse, p.string() + ": " + e.what());
    }
}

std::string digest_of(const fs::path& p) { return util::file_digest(p); }

std::shared_ptr<gen::AuditLog> audit_log(const Context& ctx, const fs::path& out_dir) {
    const fs::path path = ctx.config.paths.audit_log.empty() ? out_dir / "audit.jsonl" : ctx.config.paths.audit_log;
    return std::make_shared<gen::AuditLog>(path);
}

// ---- forge-explanations --------------------------------------------------

struct ForgeExplanationsArgs {
    fs::path qa;
    fs::path out;
};

int forge_explanations_cmd(const Context& ctx, const ForgeExplanationsArgs& a) {
    const auto& fc = ctx.config.forge;
    require_file(a.qa, "--qa");
    if (!fc.templates.empty()) require_dir(fc.templates, "forge.templates");
    if (!fc.mock_textgen.empty()) require_file(fc.mock_textgen, "forge.mock_textgen");
    const auto qas = forge::load_qa(a.qa);

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back(std::to_string(qas.size()) + " QA samples from " + a.qa.string());
        plan.steps.push_back(fc.mock_textgen.empty() ? "text generation over HTTP (MEDICO_TEXTGEN_URL)"
                                                     : "text generation from mock table " + fc.mock_textgen.string());
        plan.writes = {a.out / "explanations.jsonl", a.out / "skipped.jsonl", a.out / "manifest.json"};
        plan.print(*ctx.out, "forge-explanations");
        return kExitOk;
    }

    const auto templates =
        fc.templates.empty() ? forge::PromptTemplates::defaults() : forge::PromptTemplates::from_directory(fc.templates);
    std::unique_ptr<gen::TextGenClient> client;
    if (!fc.mock_textgen.empty())
        client = gen::MockTextGenClient::from_json(read_json_file(fc.mock_textgen));
    else
        client = gen::HttpTextGenClient::from_env(audit_log(ctx, a.out), fc.requests_per_minute);

    const auto result = forge::forge_explanations(qas, *client, templates);
    fs::create_directories(a.out);
    util::write_jsonl(a.out / "explanations.jsonl", forge::to_json_lines(result.samples));
    std::vector<json> skipped;
    for (const auto& s : result.skipped) skipped.push_back({{"sample_id", s.sample_id}, {"reason", s.reason}});
    util::write_jsonl(a.out / "skipped.jsonl", skipped);
    forge::update_manifest(a.out, "explanations",
                           {{"qa_digest", digest_of(a.qa)},
                            {"explanation_count", result.samples.size()},
                            {"skipped_count", result.skipped.size()},
                            {"output_digest", digest_of(a.out / "explanations.jsonl")}});
    *ctx.out << "explanations: " << result.samples.size() << " written, " << result.skipped.size() << " skipped\n";
    return kExitOk;
}

// ---- forge-regions -------------------------------------------------------

struct ForgeRegionsArgs {
    fs::path qa;
    fs::path cases;
    fs::path images;
    fs::path out;
};

struct CaseFile {
    std::vector<forge::PseudoCase> pseudo;
    std::vector<forge::ExternalMask> external;
    forge::PromptTable prompts;
    std::map<std::string, std::vector<std::string>> keywords;
};

CaseFile load_cases(const fs::path& path, const forge::ImageIndex& images) {
    const json j = read_json_file(path);
    const fs::path base = path.parent_path();
    CaseFile c;
    try {
        c.prompts = j.value("prompts", forge::PromptTable{});
        c.keywords = j.value("keywords", std::map<std::string, std::vector<std::string>>{});
        for (const auto& p : j.value("pseudo", json::array())) {
            forge::PseudoCase pc;
            pc.image_id = p.at("image_id").get<std::string>();
            pc.label = p.at("label").get<std::string>();
            pc.answer_text = p.value("answer", "");
            const auto img = images.find(pc.image_id);
            if (!img) fail(ErrorKind::Contract, path.string() + ": no image for pseudo case " + pc.image_id);
            pc.image_path = *img;
            c.pseudo.push_back(std::move(pc));
        }
        for (const auto& e : j.value("external", json::array())) {
            forge::ExternalMask m;
            m.image_id = e.at("image_id").get<std::string>();
            m.mask_path = util::resolve(base, e.at("mask_path").get<std::string>());
            const auto cat = forge::parse_region_category(e.at("category").get<std::string>());
            if (!cat || *cat == forge::RegionCategory::Pseudo)
                fail(ErrorKind::Parse, path.string() + ": curated masks must be polyp or instrument");
            m.category = *cat;
            m.answer_text = e.value("answer", "");
            c.external.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    return c;
}

int forge_regions_cmd(const Context& ctx, const ForgeRegionsArgs& a) {
    const auto& fc = ctx.config.forge;
    require_file(a.cases, "--cases");
    require_dir(a.images, "--images");
    if (!a.qa.empty()) require_file(a.qa, "--qa");
    if (!fc.mock_seg.empty()) require_file(fc.mock_seg, "forge.mock_seg");
    const auto images = forge::ImageIndex::from_directory(a.images);
    const CaseFile cases = load_cases(a.cases, images);

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back(std::to_string(cases.pseudo.size()) + " pseudo cases, " +
                             std::to_string(cases.external.size()) + " curated masks");
        plan.steps.push_back(fc.mock_seg.empty() ? "segmentation over HTTP (MEDICO_SEG_URL)"
                                                 : "segmentation from mock table " + fc.mock_seg.string());
        plan.writes = {a.out / "regions.jsonl", a.out / "masks", a.out / "manifest.json"};
        plan.print(*ctx.out, "forge-regions");
        return kExitOk;
    }

    std::unique_ptr<gen::SegClient> seg;
    if (!fc.mock_seg.empty())
        seg = gen::MockSegClient::from_json(read_json_file(fc.mock_seg));
    else
        seg = gen::HttpSegClient::from_env(audit_log(ctx, a.out), fc.requests_per_minute);

    std::optional<forge::AnswerLinker> linker;
    if (!a.qa.empty()) linker.emplace(forge::load_qa(a.qa), cases.keywords);

    forge::RegionForgeOptions opts;
    opts.heatmap_thresh = fc.heatmap_thresh;
    opts.refine.min_area_frac = fc.min_area_frac;
    opts.refine.dark_border_max_mean = fc.dark_border_max_mean;
    opts.output_dir = a.out;
    fs::create_directories(a.out);
    const auto result = forge::build_region_samples(cases.pseudo, cases.prompts, *seg, cases.external, opts,
                                                    linker ? &*linker : nullptr);
    util::write_jsonl(a.out / "regions.jsonl", forge::to_json_lines(result.samples));
    std::vector<json> skipped;
    for (const auto& s : result.skipped) skipped.push_back({{"sample_id", s.sample_id}, {"reason", s.reason}});
    util::write_jsonl(a.out / "skipped.jsonl", skipped);
    json entry = forge::to_json(result.counts);
    entry["cases_digest"] = digest_of(a.cases);
    entry["output_digest"] = digest_of(a.out / "regions.jsonl");
    forge::check_region_counts(entry);
    forge::update_manifest(a.out, "regions", entry);
    *ctx.out << "regions: " << result.counts.pseudo << " pseudo + " << result.counts.external
             << " curated = " << result.counts.total << " (" << result.counts.degenerate << " degenerate, "
             << result.counts.skipped << " skipped)\n";
    return kExitOk;
}

// ---- assemble ------------------------------------------------------------

struct AssembleArgs {
    fs::path qa;
    fs::path explanations;
    fs::path regions;
    fs::path images;
    fs::path out;
};

int assemble_cmd(const Context& ctx, const AssembleArgs& a) {
    if (a.qa.empty() && a.explanations.empty() && a.regions.empty())
        fail(ErrorKind::Contract, "assemble needs at least one of --qa, --explanations, --regions");
    if (!a.qa.empty()) require_file(a.qa, "--qa");
    if (!a.explanations.empty()) require_file(a.explanations, "--explanations");
    if (!a.regions.empty()) require_file(a.regions, "--regions");
    require_dir(a.images, "--images");

    const auto qa = a.qa.empty() ? std::vector<forge::QASample>{} : forge::load_qa(a.qa);
    const auto expl = a.explanations.empty() ? std::vector<forge::ExplanationSample>{}
                                             : forge::load_explanations(a.explanations);
    const auto regions = a.regions.empty() ? std::vector<forge::RegionSample>{} : forge::load_regions(a.regions);

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back(std::to_string(qa.size()) + " VQA, " + std::to_string(expl.size()) +
                             " explanation and " + std::to_string(regions.size()) + " region samples");
        plan.writes = {a.out / "multitask.jsonl", a.out / "manifest.json"};
        plan.print(*ctx.out, "assemble");
        return kExitOk;
    }

    forge::AssembleOptions opts;
    opts.regions_base = a.regions.empty() ? fs::path(".") : a.regions.parent_path();
    opts.simplify_eps = ctx.config.codec.simplify_eps;
    opts.num_bins = ctx.config.codec.num_bins;
    const auto result =
        forge::assemble_multitask(qa, expl, regions, forge::ImageIndex::from_directory(a.images), opts);
    fs::create_directories(a.out);
    util::write_jsonl(a.out / "multitask.jsonl", forge::to_json_lines(result.examples));
    json entry = forge::to_json(result.counts);
    entry["num_bins"] = opts.num_bins;
    entry["simplify_eps"] = opts.simplify_eps;
    entry["output_digest"] = digest_of(a.out / "multitask.jsonl");
    forge::update_manifest(a.out, "assemble", entry);
    *ctx.out << "multitask: " << result.examples.size() << " examples (" << result.counts.vqa << " vqa, "
             << result.counts.explanation << " explanation, " << result.counts.region << " region)\n";
    return kExitOk;
}

// ---- split ---------------------------------------------------------------

struct SplitArgs {
    fs::path in;
    fs::path out;
    std::optional<double> ratio;
};

int split_cmd(const Context& ctx, const SplitArgs& a) {
    require_file(a.in, "--in");
    const double ratio = a.ratio.value_or(ctx.config.train.split_ratio);
    if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorKind::Config, "--ratio must be in (0,1)");
    const auto examples = forge::load_multitask(a.in);

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("image-level split of " + std::to_string(examples.size()) + " examples, ratio " +
                             std::to_string(ratio) + ", seed " + std::to_string(ctx.config.seed));
        plan.writes = {a.out / "train.jsonl", a.out / "val.jsonl", a.out / "manifest.json"};
        plan.print(*ctx.out, "split");
        return kExitOk;
    }

    const auto s = forge::group_split(examples, ratio, ctx.config.seed);
    fs::create_directories(a.out);
    util::write_jsonl(a.out / "train.jsonl", forge::to_json_lines(s.train));
    util::write_jsonl(a.out / "val.jsonl", forge::to_json_lines(s.val));
    forge::update_manifest(a.out, "split",
                           {{"ratio", ratio},
                            {"seed", ctx.config.seed},
                            {"input_digest", digest_of(a.in)},
                            {"train_images", s.train_ids},
                            {"val_images", s.val_ids},
                            {"train_examples", s.train.size()},
                            {"val_examples", s.val.size()}});
    *ctx.out << "split: " << s.train_ids.size() << " train images (" << s.train.size() << " examples), "
             << s.val_ids.size() << " val images (" << s.val.size() << " examples)\n";
    return kExitOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    fs::path train_file;
    fs::path val_file;
    fs::path runs_dir;
    std::string adapter;
};

std::unique_ptr<model::ModelAdapter> http_adapter(const fs::path& audit_dir, const Context& ctx) {
    const char* url = std::getenv("MEDICO_MODEL_URL");
    if (!url || !*url) fail(ErrorKind::Config, "MEDICO_MODEL_URL is not set");
    return std::make_unique<model::HttpModelAdapter>(std::make_shared<gen::HttplibTransport>(url),
                                                     audit_log(ctx, audit_dir));
}

void check_adapter_name(const std::string& name) {
    if (name != "toy" && name != "http") fail(ErrorKind::Config, "adapter must be toy or http, got '" + name + "'");
}

int train_cmd(const Context& ctx, const TrainArgs& a) {
    check_adapter_name(a.adapter);
    require_file(a.train_file, "--train");
    require_file(a.val_file, "--val");
    const auto& cfg = ctx.config.train.config;
    cfg.validate();

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("fine-tune with the " + a.adapter + " adapter, effective batch " +
                             std::to_string(cfg.effective_batch()) + ", config hash " + train::config_hash(cfg));
        plan.writes = {a.runs_dir / "run-<id>/manifest.json"};
        plan.print(*ctx.out, "train");
        return kExitOk;
    }

    std::unique_ptr<model::ModelAdapter> adapter;
    if (a.adapter == "toy")
        adapter = std::make_unique<model::ToyAdapter>();
    else
        adapter = http_adapter(a.runs_dir, ctx);
    fs::create_directories(a.runs_dir);
    const auto m = train::run_training(*adapter, a.train_file, a.val_file, cfg, a.runs_dir);
    *ctx.out << "run " << m.run_id << " " << m.status << " (" << (a.runs_dir / m.run_id).string() << ")\n";
    return kExitOk;
}

// ---- infer ---------------------------------------------------------------

struct InferArgs {
    int subtask = 0;
    fs::path in;
    fs::path out;
    std::string adapter;
    fs::path checkpoint;
};

// Newest completed toy run under runs_dir, by finish time then run id.
std::optional<fs::path> latest_toy_checkpoint(const fs::path& runs_dir) {
    if (!fs::is_directory(runs_dir)) return std::nullopt;
    std::optional<std::pair<std::string, std::string>> best;
    fs::path best_path;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
        const auto mpath = entry.path() / "manifest.json";
        const auto ckpt = entry.path() / model::ToyAdapter::kCheckpointName;
        if (!fs::exists(mpath) || !fs::exists(ckpt)) continue;
        const auto m = train::read_manifest(mpath);
        if (m.status != "completed") continue;
        std::pair key{m.finished, m.run_id};
        if (!best || key > *best) {
            best = key;
            best_path = ckpt;
        }
    }
    if (!best) return std::nullopt;
    return best_path;
}

int infer_cmd(const Context& ctx, const InferArgs& a) {
    check_adapter_name(a.adapter);
    if (a.subtask != 1 && a.subtask != 2) fail(ErrorKind::Contract, "--subtask must be 1 or 2");
    require_dir(a.in, "--in");
    const fs::path questions = a.in / "questions.jsonl";
    const fs::path images = a.in / "images";
    require_file(questions, "questions.jsonl");
    require_dir(images, "images/");
    const auto items = infer::load_inference_items(questions);

    fs::path checkpoint = a.checkpoint;
    if (a.adapter == "toy") {
        if (checkpoint.empty()) {
            const auto found = latest_toy_checkpoint(ctx.config.train.runs_dir);
            if (!found)
                fail(ErrorKind::Config, "no toy checkpoint: pass --checkpoint or run train first (looked in " +
                                            ctx.config.train.runs_dir.string() + ")");
            checkpoint = *found;
        } else if (fs::is_directory(checkpoint)) {
            checkpoint /= model::ToyAdapter::kCheckpointName;
        }
        require_file(checkpoint, "toy checkpoint");
    }

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("subtask " + std::to_string(a.subtask) + " on " + std::to_string(items.size()) +
                             " questions with the " + a.adapter + " adapter" +
                             (checkpoint.empty() ? "" : " (" + checkpoint.string() + ")"));
        plan.writes = {a.out / "predictions.jsonl"};
        if (a.subtask == 2) plan.writes.push_back(a.out / "masks");
        plan.print(*ctx.out, "infer");
        return kExitOk;
    }

    std::unique_ptr<model::ModelAdapter> adapter;
    if (a.adapter == "toy")
        adapter = model::ToyAdapter::load(checkpoint);
    else
        adapter = http_adapter(a.out, ctx);

    infer::InferOptions opts;
    opts.decode.max_tokens = ctx.config.infer.max_tokens;
    opts.decode.top_k_record = ctx.config.infer.top_k_record;
    opts.confidence_k = ctx.config.infer.confidence_k;
    const auto summary = infer::run_batch(*adapter, a.subtask, items, images, a.out, opts);
    *ctx.out << "predictions: " << summary.total << " (" << summary.masks << " masks, " << summary.failures
             << " stage failures) in " << (a.out / "predictions.jsonl").string() << "\n";
    return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
    fs::path pred;
    fs::path ref;
    fs::path out;
    fs::path pred_masks;
    fs::path ref_masks;
    std::vector<std::string> ingest;
};

std::map<std::string, double> parse_ingest(const std::vector<std::string>& items) {
    std::map<std::string, double> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            fail(ErrorKind::Contract, "--ingest expects name=value, got '" + item + "'");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item.substr(eq + 1), &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() - eq - 1)
            fail(ErrorKind::Contract, "--ingest value is not a number: '" + item + "'");
        out[item.substr(0, eq)] = v;
    }
    return out;
}

int evaluate_cmd(const Context& ctx, const EvaluateArgs& a) {
    require_file(a.pred, "--pred");
    require_file(a.ref, "--ref");
    eval::ReportInputs in;
    in.pred_file = a.pred;
    in.ref_file = a.ref;
    in.pred_mask_dir = a.pred_masks;
    in.ref_mask_dir = a.ref_masks;
    in.ingested = ctx.config.eval.ingested;
    for (const auto& [k, v] : parse_ingest(a.ingest)) in.ingested[k] = v;

    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("score " + a.pred.string() + " against " + a.ref.string());
        plan.writes = {a.out};
        plan.print(*ctx.out, "evaluate");
        return kExitOk;
    }

    const auto report = eval::build_report(in);
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    util::write_file_atomic(a.out, eval::to_json(report).dump(2) + "\n");
    *ctx.out << "BLEU " << report.bleu << "  ROUGE-1 " << report.rouge1 << "  ROUGE-2 " << report.rouge2
             << "  ROUGE-L " << report.rougeL << "  METEOR(exact) " << report.meteor << "  chrF++ "
             << report.chrf_pp << "\n";
    for (const auto& [cat, v] : report.seg_iou) *ctx.out << "Seg-IoU " << cat << " " << v << "\n";
    return kExitOk;
}

// ---- radar ---------------------------------------------------------------

struct RadarArgs {
    fs::path judge;
    fs::path out;
};

int radar_cmd(const Context& ctx, const RadarArgs& a) {
    require_file(a.judge, "--judge");
    const auto judge = eval::judge_from_json(read_json_file(a.judge));
    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("export " + std::to_string(judge.size()) + " question types");
        plan.writes = {a.out};
        plan.print(*ctx.out, "radar");
        return kExitOk;
    }
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    util::write_file_atomic(a.out, eval::radar_csv(judge));
    *ctx.out << "radar: " << judge.size() << " question types -> " << a.out.string() << "\n";
    return kExitOk;
}

// ---- codec ---------------------------------------------------------------

struct CodecArgs {
    fs::path mask;
    fs::path tokens;
    fs::path out;
    int width = 0;
    int height = 0;
};

int codec_encode_cmd(const Context& ctx, const CodecArgs& a) {
    require_file(a.mask, "--mask");
    const auto mask = imaging::read_mask(a.mask);
    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("encode " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                             " mask with " + std::to_string(ctx.config.codec.num_bins) + " bins");
        if (!a.out.empty()) plan.writes = {a.out};
        plan.print(*ctx.out, "codec encode");
        return kExitOk;
    }
    const auto seq = codec::mask_to_tokens(mask, ctx.config.codec.simplify_eps, ctx.config.codec.num_bins);
    const std::string text = codec::render_tokens(seq);
    if (a.out.empty())
        *ctx.out << text << "\n";
    else
        util::write_file_atomic(a.out, text + "\n");
    return kExitOk;
}

int codec_decode_cmd(const Context& ctx, const CodecArgs& a) {
    require_file(a.tokens, "--tokens");
    if (a.width < 1 || a.height < 1) fail(ErrorKind::Contract, "--width and --height must be >= 1");
    if (a.out.empty()) fail(ErrorKind::Contract, "--out is required");
    const auto seq = codec::parse_token_text(util::read_file(a.tokens), ctx.config.codec.num_bins);
    if (ctx.dry_run) {
        Plan plan;
        plan.steps.push_back("decode " + std::to_string(seq.segment_count()) + " polygons");
        plan.writes = {a.out};
        plan.print(*ctx.out, "codec decode");
        return kExitOk;
    }
    imaging::write_mask(a.out, codec::tokens_to_mask(seq, a.width, a.height));
    *ctx.out << "mask: " << a.out.string() << "\n";
    return kExitOk;
}

fs::path absolute_or_empty(const fs::path& p) { return p.empty() ? p : fs::absolute(p); }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-task GI VQA pipeline: dataset forging, location-token codec, training, inference and "
                 "evaluation"};
    app.require_subcommand(1);

    std::string config_file;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    bool dry_run = false;
    bool verbose = false;
    app.add_option("--config", config_file, "INI configuration file")->check(CLI::ExistingFile);
    app.add_option("--workers", workers, "Worker threads for forge, inference and evaluation (default 4)")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Random seed (overrides config)");
    app.add_flag("--dry-run", dry_run, "Validate inputs and print the plan without writing anything");
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    ForgeExplanationsArgs fe;
    auto* fe_cmd = app.add_subcommand("forge-explanations", "Generate explanations for complexity-1 QA pairs");
    fe_cmd->add_option("--qa", fe.qa, "QA samples (JSONL)")->required();
    fe_cmd->add_option("--out", fe.out, "Output directory");
    std::string fe_templates, fe_mock;
    fe_cmd->add_option("--templates", fe_templates, "Prompt template directory");
    fe_cmd->add_option("--mock-textgen", fe_mock, "Mock text generation table (JSON)");

    ForgeRegionsArgs fr;
    auto* fr_cmd = app.add_subcommand("forge-regions", "Build pseudo and curated region samples");
    fr_cmd->add_option("--cases", fr.cases, "Pseudo cases and curated masks (JSON)")->required();
    fr_cmd->add_option("--qa", fr.qa, "QA samples used to link masks to answers");
    fr_cmd->add_option("--images", fr.images, "Image directory");
    fr_cmd->add_option("--out", fr.out, "Output directory");
    std::string fr_mock;
    fr_cmd->add_option("--mock-seg", fr_mock, "Mock segmentation table (JSON)");

    AssembleArgs as;
    auto* as_cmd = app.add_subcommand("assemble", "Merge forged datasets into task-tagged examples");
    as_cmd->add_option("--qa", as.qa, "QA samples (JSONL)");
    as_cmd->add_option("--explanations", as.explanations, "Explanation samples (JSONL)");
    as_cmd->add_option("--regions", as.regions, "Region samples (JSONL)");
    as_cmd->add_option("--images", as.images, "Image directory");
    as_cmd->add_option("--out", as.out, "Output directory");

    SplitArgs sp;
    auto* sp_cmd = app.add_subcommand("split", "Image-level train/validation split");
    sp_cmd->add_option("--in", sp.in, "multitask.jsonl")->required();
    sp_cmd->add_option("--out", sp.out, "Output directory");
    sp_cmd->add_option("--ratio", sp.ratio, "Train fraction of image ids");

    TrainArgs tr;
    auto* tr_cmd = app.add_subcommand("train", "Fine-tune through a model adapter");
    tr_cmd->add_option("--train", tr.train_file, "Training examples (JSONL)")->required();
    tr_cmd->add_option("--val", tr.val_file, "Validation examples (JSONL)")->required();
    tr_cmd->add_option("--runs", tr.runs_dir, "Run directory root");
    tr_cmd->add_option("--adapter", tr.adapter, "toy or http");

    InferArgs inf;
    auto* in_cmd = app.add_subcommand("infer", "Answer (subtask 1) or answer, ground and explain (subtask 2)");
    in_cmd->add_option("--subtask", inf.subtask, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
    in_cmd->add_option("--in", inf.in, "Directory with questions.jsonl and images/")->required();
    in_cmd->add_option("--out", inf.out, "Output directory");
    in_cmd->add_option("--adapter", inf.adapter, "toy or http");
    in_cmd->add_option("--checkpoint", inf.checkpoint, "Toy checkpoint file or run directory");

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "Score predictions against references");
    ev_cmd->add_option("--pred", ev.pred, "predictions.jsonl")->required();
    ev_cmd->add_option("--ref", ev.ref, "refs.jsonl")->required();
    ev_cmd->add_option("--out", ev.out, "Report path (JSON)");
    ev_cmd->add_option("--pred-masks", ev.pred_masks, "Base directory for predicted mask paths");
    ev_cmd->add_option("--ref-masks", ev.ref_masks, "Base directory for reference mask paths");
    ev_cmd->add_option("--ingest", ev.ingest, "Externally computed score, name=value (repeatable)");

    RadarArgs ra;
    auto* ra_cmd = app.add_subcommand("radar", "Export judge scores as radar-chart CSV");
    ra_cmd->add_option("--judge", ra.judge, "Judge scores (JSON)")->required();
    ra_cmd->add_option("--out", ra.out, "CSV path");

    CodecArgs co;
    std::optional<int> bins;
    std::optional<double> eps;
    auto* co_cmd = app.add_subcommand("codec", "Mask <-> location token conversion");
    co_cmd->require_subcommand(1);
    auto* enc = co_cmd->add_subcommand("encode", "Mask PNG to location tokens");
    enc->add_option("--mask", co.mask, "Mask PNG")->required();
    enc->add_option("--out", co.out, "Token file (default: stdout)");
    enc->add_option("--bins", bins, "Quantization bins");
    enc->add_option("--eps", eps, "Simplification tolerance in pixels");
    auto* dec = co_cmd->add_subcommand("decode", "Location tokens to mask PNG");
    dec->add_option("--tokens", co.tokens, "Token file")->required();
    dec->add_option("--width", co.width, "Mask width")->required();
    dec->add_option("--height", co.height, "Mask height")->required();
    dec->add_option("--out", co.out, "Mask PNG")->required();
    dec->add_option("--bins", bins, "Quantization bins");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitValidation;
    }

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("medvqa", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> prev;
        ~Restore() { spdlog::set_default_logger(prev); }
    } restore{previous};

    try {
        Context ctx;
        ctx.dry_run = dry_run;
        ctx.out = &out;
        ctx.config = config_file.empty() ? default_config(fs::current_path()) : load_config(config_file);
        if (workers) ctx.config.workers = *workers;
        if (seed) {
            ctx.config.seed = *seed;
            ctx.config.train.config.seed = *seed;
        }
        if (bins) ctx.config.codec.num_bins = *bins;
        if (eps) ctx.config.codec.simplify_eps = *eps;
        if (ctx.config.codec.num_bins < 1) fail(ErrorKind::Config, "--bins must be >= 1");
        if (ctx.config.codec.simplify_eps < 0.0) fail(ErrorKind::Config, "--eps must be >= 0");
        parallel::set_threads(ctx.config.workers);

        const auto& cfg = ctx.config;
        auto or_default = [](const fs::path& p, const fs::path& fallback) {
            return p.empty() ? fallback : absolute_or_empty(p);
        };
        auto flag_or = [](const std::string& flag, const fs::path& fallback) {
            return flag.empty() ? fallback : fs::absolute(flag);
        };

        if (*fe_cmd) {
            if (!fe_templates.empty()) ctx.config.forge.templates = fs::absolute(fe_templates);
            if (!fe_mock.empty()) ctx.config.forge.mock_textgen = fs::absolute(fe_mock);
            fe.out = or_default(fe.out, cfg.paths.work_dir / "explanations");
            return forge_explanations_cmd(ctx, fe);
        }
        if (*fr_cmd) {
            ctx.config.forge.mock_seg = flag_or(fr_mock, cfg.forge.mock_seg);
            fr.images = or_default(fr.images, cfg.paths.images);
            fr.out = or_default(fr.out, cfg.paths.work_dir / "regions");
            return forge_regions_cmd(ctx, fr);
        }
        if (*as_cmd) {
            as.images = or_default(as.images, cfg.paths.images);
            as.out = or_default(as.out, cfg.paths.work_dir / "multitask");
            return assemble_cmd(ctx, as);
        }
        if (*sp_cmd) {
            sp.out = or_default(sp.out, cfg.paths.work_dir / "split");
            return split_cmd(ctx, sp);
        }
        if (*tr_cmd) {
            tr.runs_dir = or_default(tr.runs_dir, cfg.train.runs_dir);
            if (tr.adapter.empty()) tr.adapter = cfg.train.adapter;
            return train_cmd(ctx, tr);
        }
        if (*in_cmd) {
            inf.out = or_default(inf.out, cfg.paths.work_dir / "predictions");
            if (inf.adapter.empty()) inf.adapter = cfg.infer.adapter;
            inf.checkpoint = or_default(inf.checkpoint, cfg.infer.checkpoint);
            return infer_cmd(ctx, inf);
        }
        if (*ev_cmd) {
            ev.out = or_default(ev.out, cfg.paths.work_dir / "report.json");
            return evaluate_cmd(ctx, ev);
        }
        if (*ra_cmd) {
            ra.out = or_default(ra.out, cfg.paths.work_dir / "radar.csv");
            return radar_cmd(ctx, ra);
        }
        if (*enc) return codec_encode_cmd(ctx, co);
        if (*dec) return codec_decode_cmd(ctx, co);
        err << "usage error: no command\n";
        return kExitValidation;
    } catch (const Error& e) {
        err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error [io]: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace medvqa::cli
