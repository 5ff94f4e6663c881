#include "medvqa/imaging/binary_mask.hpp"

#include <algorithm>
#include <string>

#include "medvqa/error.hpp"

namespace medvqa::imaging {

namespace {
void check_dims(int w, int h) {
    if (w < 1 || h < 1)
        fail(ErrorKind::Dimension,
             "raster dimensions must be >= 1, got " + std::to_string(w) + "x" + std::to_string(h));
}
}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {
    check_dims(w, h);
}

Heatmap::Heatmap(int w, int h, float fill)
    : width(w), height(h), values(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {
    check_dims(w, h);
}

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
    check_dims(width, height);
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
    check_dims(width, height);
    if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        fail(ErrorKind::Dimension, "mask bit count " + std::to_string(bits_.size()) +
                                       " does not match " + std::to_string(width) + "x" +
                                       std::to_string(height));
    for (auto& b : bits_) b = b ? 1 : 0;
}

BinaryMask BinaryMask::from_rows(std::initializer_list<std::initializer_list<int>> rows) {
    const int h = static_cast<int>(rows.size());
    const int w = h > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    std::vector<std::uint8_t> bits;
    bits.reserve(static_cast<std::size_t>(w) * std::max(h, 0));
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != w) fail(ErrorKind::Dimension, "ragged mask literal");
        for (int v : row) bits.push_back(v ? 1 : 0);
    }
    return BinaryMask(w, h, std::move(bits));
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace medvqa::imaging
