#include "medvqa/eval/report.hpp"

#include <charconv>
#include <exception>
#include <set>

#include "medvqa/error.hpp"
#include "medvqa/eval/text_metrics.hpp"
#include "medvqa/imaging/ops.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/parallel.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::eval {

namespace fs = std::filesystem;
using nlohmann::json;

SegIouResult seg_iou_by_category(const std::vector<SegPair>& pairs) {
    std::vector<double> ious(pairs.size(), 0.0);
    std::vector<std::exception_ptr> errors(pairs.size());
    parallel::for_each_index(static_cast<std::ptrdiff_t>(pairs.size()), [&](std::ptrdiff_t i) {
        try {
            if (pairs[i].prediction) ious[i] = imaging::iou(*pairs[i].prediction, pairs[i].reference);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::map<std::string, double> sums;
    SegIouResult out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const std::string key(forge::to_string(pairs[i].category));
        sums[key] += ious[i];
        ++out.counts[key];
    }
    for (const auto& [k, total] : sums) out.mean_iou[k] = total / static_cast<double>(out.counts[k]);
    return out;
}

json to_json(const MetricReport& r) {
    json j;
    j["bleu"] = r.bleu;
    j["rouge1"] = r.rouge1;
    j["rouge2"] = r.rouge2;
    j["rougeL"] = r.rougeL;
    j["meteor_exact"] = r.meteor;
    j["chrf_pp"] = r.chrf_pp;
    j["seg_iou"] = r.seg_iou;
    j["counts"] = r.counts;
    j["config"] = r.config;
    j["ingested"] = r.ingested;
    return j;
}

MetricReport report_from_json(const json& j) {
    try {
        MetricReport r;
        r.bleu = j.at("bleu").get<double>();
        r.rouge1 = j.at("rouge1").get<double>();
        r.rouge2 = j.at("rouge2").get<double>();
        r.rougeL = j.at("rougeL").get<double>();
        r.meteor = j.at("meteor_exact").get<double>();
        r.chrf_pp = j.at("chrf_pp").get<double>();
        r.seg_iou = j.at("seg_iou").get<std::map<std::string, double>>();
        r.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
        r.config = j.value("config", json::object());
        r.ingested = j.value("ingested", std::map<std::string, double>{});
        return r;
    } catch (const json::exception& e) {
        fail(ErrorKind::Parse, std::string("malformed report: ") + e.what());
    }
}

namespace {

struct Row {
    std::string answer;
    std::optional<fs::path> mask_path;
    std::optional<forge::RegionCategory> category;
};

std::map<std::string, Row> load_rows(const fs::path& file, const fs::path& mask_dir) {
    std::map<std::string, Row> rows;
    const auto records = util::read_jsonl(file);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& j = records[i];
        const auto where = file.string() + ":" + std::to_string(i + 1);
        if (!j.is_object() || !j.contains("sample_id") || !j["sample_id"].is_string())
            fail(ErrorKind::Parse, where + ": missing sample_id");
        Row row;
        if (j.contains("answer") && !j["answer"].is_null()) {
            if (!j["answer"].is_string()) fail(ErrorKind::Parse, where + ": answer is not a string");
            row.answer = j["answer"].get<std::string>();
        }
        if (j.contains("mask_path") && j["mask_path"].is_string())
            row.mask_path = util::resolve(mask_dir, j["mask_path"].get<std::string>());
        if (j.contains("category") && j["category"].is_string()) {
            row.category = forge::parse_region_category(j["category"].get<std::string>());
            if (!row.category) fail(ErrorKind::Parse, where + ": unknown category " + j["category"].dump());
        }
        const auto id = j["sample_id"].get<std::string>();
        if (!rows.emplace(id, std::move(row)).second) fail(ErrorKind::Parse, where + ": duplicate sample_id " + id);
    }
    return rows;
}

fs::path dir_or_parent(const fs::path& dir, const fs::path& file) {
    if (!dir.empty()) return dir;
    return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

}  // namespace

MetricReport build_report(const ReportInputs& in) {
    const auto preds = load_rows(in.pred_file, dir_or_parent(in.pred_mask_dir, in.pred_file));
    const auto refs = load_rows(in.ref_file, dir_or_parent(in.ref_mask_dir, in.ref_file));

    std::vector<std::string> only_pred, only_ref;
    for (const auto& [id, row] : preds)
        if (!refs.contains(id)) only_pred.push_back(id);
    for (const auto& [id, row] : refs)
        if (!preds.contains(id)) only_ref.push_back(id);
    if (!only_pred.empty() || !only_ref.empty()) {
        std::string msg = "sample_id mismatch between predictions and references;";
        auto list = [&](const char* label, const std::vector<std::string>& ids) {
            if (ids.empty()) return;
            msg += std::string(" ") + label + ":";
            for (const auto& id : ids) msg += " " + id;
        };
        list("only in predictions", only_pred);
        list("only in references", only_ref);
        fail(ErrorKind::Contract, msg);
    }
    if (refs.empty()) fail(ErrorKind::Contract, "no samples to evaluate");

    std::vector<std::string> hyps, ref_texts;
    std::vector<SegPair> seg;
    std::size_t missing_masks = 0;
    for (const auto& [id, ref] : refs) {
        const Row& pred = preds.at(id);
        hyps.push_back(pred.answer);
        ref_texts.push_back(ref.answer);
        if (!ref.mask_path || !ref.category) continue;
        SegPair pair{std::nullopt, imaging::read_mask(*ref.mask_path), *ref.category};
        if (pred.mask_path && fs::exists(*pred.mask_path))
            pair.prediction = imaging::read_mask(*pred.mask_path);
        else
            ++missing_masks;
        seg.push_back(std::move(pair));
    }

    const CorpusScores scores = corpus_scores(hyps, ref_texts);
    MetricReport r;
    r.bleu = scores.bleu;
    r.rouge1 = scores.rouge1;
    r.rouge2 = scores.rouge2;
    r.rougeL = scores.rougeL;
    r.meteor = scores.meteor;
    r.chrf_pp = scores.chrf_pp;
    r.counts["samples"] = refs.size();
    r.counts["seg_samples"] = seg.size();
    r.counts["seg_missing_predictions"] = missing_masks;
    if (!seg.empty()) {
        const auto s = seg_iou_by_category(seg);
        r.seg_iou = s.mean_iou;
        for (const auto& [k, n] : s.counts) r.counts["seg_" + k] = n;
    }
    r.config = {{"tokenizer", "lowercase, punctuation split, whitespace split"},
                {"bleu_max_n", 4},
                {"bleu_smoothing", "add-one on zero matches"},
                {"meteor", "exact unigram match"},
                {"chrf_char_order", 6},
                {"chrf_word_order", 2},
                {"chrf_beta", 2.0}};
    r.ingested = in.ingested;
    return r;
}

JudgeScores judge_from_json(const json& j) {
    if (!j.is_object()) fail(ErrorKind::Parse, "judge scores must be an object of question types");
    JudgeScores out;
    for (const auto& [qtype, metrics] : j.items()) {
        if (!metrics.is_object()) fail(ErrorKind::Parse, "judge scores for " + qtype + " must be an object");
        for (const auto& [metric, value] : metrics.items()) {
            if (!value.is_number()) fail(ErrorKind::Parse, "judge score " + qtype + "/" + metric + " is not a number");
            const double v = value.get<double>();
            if (!(v >= 0.0 && v <= 1.0))
                fail(ErrorKind::Range, "judge score " + qtype + "/" + metric + " outside [0,1]");
            out[qtype][metric] = v;
        }
    }
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

// Splits one CSV record starting at pos; advances pos past the line break.
std::vector<std::string> read_record(std::string_view csv, std::size_t& pos) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false, was_quoted = false;
    while (pos < csv.size()) {
        const char c = csv[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < csv.size() && csv[pos] == '"') {
                    cur += '"';
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty() && !was_quoted) {
            quoted = was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            was_quoted = false;
        } else if (c == '\n') {
            break;
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) fail(ErrorKind::Parse, "radar csv: unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace

std::string radar_csv(const JudgeScores& judge) {
    std::string out = "question_type,metric,value\n";
    for (const auto& [qtype, metrics] : judge)
        for (const auto& [metric, value] : metrics)
            out += csv_field(qtype) + "," + csv_field(metric) + "," + format_double(value) + "\n";
    return out;
}

JudgeScores parse_radar_csv(std::string_view csv) {
    std::size_t pos = 0;
    const auto header = read_record(csv, pos);
    if (header != std::vector<std::string>{"question_type", "metric", "value"})
        fail(ErrorKind::Parse, "radar csv: expected header question_type,metric,value");
    JudgeScores out;
    std::size_t line = 1;
    while (pos < csv.size()) {
        ++line;
        const auto rec = read_record(csv, pos);
        if (rec.size() == 1 && rec[0].empty()) continue;
        if (rec.size() != 3) fail(ErrorKind::Parse, "radar csv line " + std::to_string(line) + ": expected 3 fields");
        double v = 0.0;
        const auto& s = rec[2];
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || end != s.data() + s.size())
            fail(ErrorKind::Parse, "radar csv line " + std::to_string(line) + ": bad value '" + s + "'");
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::Range, "radar csv line " + std::to_string(line) + ": value outside [0,1]");
        if (!out[rec[0]].emplace(rec[1], v).second)
            fail(ErrorKind::Parse, "radar csv line " + std::to_string(line) + ": duplicate entry");
    }
    return out;
}

}  // namespace medvqa::eval
