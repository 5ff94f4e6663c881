#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace medvqa {

// Task prefixes understood by the multi-task model.
enum class TaskToken { MedVQA, MedVQAExplain, ReferringSegmentation };

inline constexpr std::array<TaskToken, 3> kAllTasks{TaskToken::MedVQA, TaskToken::MedVQAExplain,
                                                    TaskToken::ReferringSegmentation};

constexpr std::string_view to_string(TaskToken t) noexcept {
    switch (t) {
        case TaskToken::MedVQA: return "<MedVQA>";
        case TaskToken::MedVQAExplain: return "<MedVQA_EXPLAIN>";
        case TaskToken::ReferringSegmentation: return "<REFERRING_EXPRESSION_SEGMENTATION>";
    }
    return "";
}

constexpr std::optional<TaskToken> parse_task_token(std::string_view s) noexcept {
    for (TaskToken t : kAllTasks)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

// Suffix appended to the question for the explanation task.
inline constexpr std::string_view kExplainSuffix = "Explain in detail";

}  // namespace medvqa
