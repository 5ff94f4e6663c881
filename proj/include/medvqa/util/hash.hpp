#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace medvqa::util {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Rolling digest over a JSONL file: each line (without its terminator) is
// hashed on its own and folded into a running 64-bit state, so a single
// flipped byte anywhere changes the result.
std::uint64_t jsonl_digest(std::string_view contents);
std::string file_digest(const std::filesystem::path& path);

}  // namespace medvqa::util
