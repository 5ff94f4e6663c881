#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace medvqa::imaging {

// 8-bit single-channel raster. Used for grayscale source frames.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, width*height

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool empty() const { return width <= 0 || height <= 0; }
};

// Real-valued map in [0,1], as returned by text-conditioned segmenters.
struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    Heatmap() = default;
    Heatmap(int w, int h, float fill = 0.0f);

    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

class BinaryMask {
public:
    // Throws Error(Dimension) unless width >= 1 and height >= 1.
    BinaryMask(int width, int height);
    BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

    // Row-major literal, e.g. {{0,1},{1,0}}. Rows must have equal length.
    static BinaryMask from_rows(std::initializer_list<std::initializer_list<int>> rows);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }
    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::size_t count() const noexcept;
    bool empty() const noexcept { return count() == 0; }

    // 0/1 per pixel, row-major.
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }
    std::span<std::uint8_t> bits() noexcept { return bits_; }

    bool same_shape(const BinaryMask& o) const noexcept {
        return width_ == o.width_ && height_ == o.height_;
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

}  // namespace medvqa::imaging
