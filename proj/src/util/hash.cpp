#include "medvqa/util/hash.hpp"

#include <bit>
#include <cstdio>

#include "medvqa/util/files.hpp"

namespace medvqa::util {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t jsonl_digest(std::string_view contents) {
    std::uint64_t state = kFnvOffset;
    std::size_t start = 0;
    std::uint64_t line_no = 0;
    while (start < contents.size()) {
        std::size_t end = contents.find('\n', start);
        if (end == std::string_view::npos) end = contents.size();
        const std::uint64_t line_hash = fnv1a64(contents.substr(start, end - start));
        state = std::rotl(state, 7) ^ (line_hash + 0x9e3779b97f4a7c15ull * ++line_no);
        state *= kFnvPrime;
        start = end + 1;
    }
    // fold in the length so trailing-newline edits are visible too
    return state ^ fnv1a64(std::to_string(contents.size()));
}

std::string file_digest(const std::filesystem::path& path) {
    return hex64(jsonl_digest(read_file(path)));
}

}  // namespace medvqa::util
