#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "medvqa/forge/records.hpp"
#include "medvqa/imaging/binary_mask.hpp"

namespace medvqa::eval {

struct SegPair {
    std::optional<imaging::BinaryMask> prediction;  // absent counts as IoU 0
    imaging::BinaryMask reference;
    forge::RegionCategory category;
};

struct SegIouResult {
    std::map<std::string, double> mean_iou;  // keys: instrument / polyp / pseudo
    std::map<std::string, std::size_t> counts;
};

SegIouResult seg_iou_by_category(const std::vector<SegPair>& pairs);

struct MetricReport {
    double bleu = 0.0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double meteor = 0.0;  // exact-match variant, serialized as "meteor_exact"
    double chrf_pp = 0.0;
    std::map<std::string, double> seg_iou;
    std::map<std::string, std::size_t> counts;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, double> ingested;  // externally computed scores, copied untouched
};

nlohmann::json to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

struct ReportInputs {
    std::filesystem::path pred_file;
    std::filesystem::path ref_file;
    // Base directories for relative mask paths; empty means the directory of
    // the corresponding file.
    std::filesystem::path pred_mask_dir;
    std::filesystem::path ref_mask_dir;
    std::map<std::string, double> ingested;
};

// Joins predictions and references on sample_id and scores answers. A
// reference with mask_path and category contributes to seg_iou. Error(Contract)
// lists ids present on only one side; an unreadable reference mask is an error.
MetricReport build_report(const ReportInputs& in);

// question type -> metric -> score in [0,1], as supplied by an external judge.
using JudgeScores = std::map<std::string, std::map<std::string, double>>;

// {"<question type>": {"<metric>": value, ...}, ...}; values outside [0,1]
// are rejected with Error(Range).
JudgeScores judge_from_json(const nlohmann::json& j);

// "question_type,metric,value" rows, sorted, values in shortest
// round-trip decimal form.
std::string radar_csv(const JudgeScores& judge);
JudgeScores parse_radar_csv(std::string_view csv);

}  // namespace medvqa::eval
