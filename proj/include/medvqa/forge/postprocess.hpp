#pragma once

#include <string>
#include <string_view>

namespace medvqa::forge {

// Fluency cleanup for generated explanations: drops code fences and leading
// role labels ("Assistant:", "Explanation:" ...), collapses whitespace,
// removes a sentence that immediately repeats the previous one, and ends
// the text with terminal punctuation. Empty in, empty out.
std::string postprocess_explanation(std::string_view text);

}  // namespace medvqa::forge
