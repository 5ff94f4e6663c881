#pragma once

#include "medvqa/model/adapter.hpp"

namespace medvqa::infer {

enum class ConfidenceMode {
    TopKMass,  // mean over steps of the summed top-k probabilities
    Top1,      // mean over steps of the top-1 probability
};

// Decoding-stability score of a generated sequence. Error(Contract) on an
// empty trace or a step holding fewer than k entries.
double confidence(const model::DecodingTrace& trace, int k = 5, ConfidenceMode mode = ConfidenceMode::TopKMass);

}  // namespace medvqa::infer
