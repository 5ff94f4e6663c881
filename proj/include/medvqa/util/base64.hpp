#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace medvqa::util {

std::string base64_encode(std::string_view bytes);
// Throws Error(Parse) on characters outside the standard alphabet.
std::string base64_decode(std::string_view text);

}  // namespace medvqa::util
