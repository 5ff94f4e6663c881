#include "medvqa/infer/confidence.hpp"

#include <string>

#include "medvqa/error.hpp"

namespace medvqa::infer {

double confidence(const model::DecodingTrace& trace, int k, ConfidenceMode mode) {
    if (k < 1) fail(ErrorKind::Contract, "confidence: k must be >= 1");
    if (trace.steps.empty()) fail(ErrorKind::Contract, "confidence: empty trace");
    double total = 0.0;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const auto& step = trace.steps[t];
        if (step.size() < static_cast<std::size_t>(k))
            fail(ErrorKind::Contract, "confidence: step " + std::to_string(t) + " records " +
                                          std::to_string(step.size()) + " entries, need " + std::to_string(k));
        if (mode == ConfidenceMode::Top1) {
            total += step.front().prob;
            continue;
        }
        double mass = 0.0;
        for (int i = 0; i < k; ++i) mass += step[static_cast<std::size_t>(i)].prob;
        total += mass;
    }
    return total / static_cast<double>(trace.steps.size());
}

}  // namespace medvqa::infer
