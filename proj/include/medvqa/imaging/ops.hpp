#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "medvqa/imaging/binary_mask.hpp"

namespace medvqa::imaging {

enum class Connectivity { Four = 4, Eight = 8 };

struct BoundingBox {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive
    bool contains(int x, int y) const noexcept { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Component {
    int label = 0;  // 1-based, scan order of first pixel
    std::size_t pixel_count = 0;
    BoundingBox bounding_box;
    bool touches_border = false;
};

// Per-pixel labels (0 = background) plus component summaries.
struct Labeling {
    int width = 0;
    int height = 0;
    std::vector<int> labels;
    std::vector<Component> components;
};

// true iff intensity > thresh. Throws Error(Dimension) on an empty image.
BinaryMask threshold_mask(const GrayImage& image, int thresh);
// true iff value > thresh.
BinaryMask threshold_heatmap(const Heatmap& heatmap, double thresh);

Labeling label_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight);
std::vector<Component> connected_components(const BinaryMask& mask,
                                            Connectivity conn = Connectivity::Eight);

struct RefineOptions {
    double min_area_frac = 0.01;
    Connectivity connectivity = Connectivity::Eight;
    // Border-touching components whose mean source intensity is at or below
    // this value are treated as the black frame around endoscopy images.
    int dark_border_max_mean = 10;
};

// Area filter only: keep components with pixel_count >= min_area_frac * W * H.
BinaryMask refine_mask(const BinaryMask& mask, double min_area_frac,
                       Connectivity conn = Connectivity::Eight);

// Dark-border removal against the source frame, then the area filter.
// The source must have the mask's dimensions.
BinaryMask refine_mask(const BinaryMask& mask, const GrayImage& source, const RefineOptions& opts);

// Pixel-wise OR. Throws on an empty list or mismatched dimensions.
BinaryMask union_masks(std::span<const BinaryMask> masks);

// |a & b| / |a | b|, 1.0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

// Batch IoU over aligned pairs; OpenMP over pairs.
std::vector<double> iou_many(std::span<const BinaryMask> a, std::span<const BinaryMask> b);

}  // namespace medvqa::imaging
