#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "medvqa/imaging/binary_mask.hpp"

namespace medvqa::imaging {

// Any bit depth / color type is accepted; color is reduced to luma
// (0.299 R + 0.587 G + 0.114 B), alpha is dropped.
GrayImage decode_png(std::string_view bytes);
GrayImage read_png(const std::filesystem::path& path);

std::string encode_png(const GrayImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

// Mask files: 8-bit gray, 0 background, 255 foreground; > 127 reads as set.
BinaryMask read_mask(const std::filesystem::path& path);
BinaryMask mask_from_gray(const GrayImage& image);
GrayImage mask_to_gray(const BinaryMask& mask);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace medvqa::imaging
