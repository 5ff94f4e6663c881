#include "medvqa/imaging/ops.hpp"

#include <algorithm>
#include <string>

#include "medvqa/error.hpp"
#include "medvqa/parallel.hpp"

namespace medvqa::imaging {

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
    if (!a.same_shape(b))
        fail(ErrorKind::Dimension, std::string(what) + ": mask dimensions differ (" +
                                       std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                                       " vs " + std::to_string(b.width()) + "x" +
                                       std::to_string(b.height()) + ")");
}

constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace

BinaryMask threshold_mask(const GrayImage& image, int thresh) {
    if (image.empty() || image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
        fail(ErrorKind::Dimension, "threshold_mask: empty image");
    if (thresh < 0 || thresh > 255)
        fail(ErrorKind::Range, "threshold_mask: thresh must be in [0,255]");
    BinaryMask out(image.width, image.height);
    auto bits = out.bits();
    const int w = image.width;
    parallel::for_each_row(image.height, [&](std::ptrdiff_t y) {
        const std::size_t row = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) bits[row + x] = image.pixels[row + x] > thresh ? 1 : 0;
    });
    return out;
}

BinaryMask threshold_heatmap(const Heatmap& heatmap, double thresh) {
    if (heatmap.width < 1 || heatmap.height < 1 ||
        heatmap.values.size() != static_cast<std::size_t>(heatmap.width) * heatmap.height)
        fail(ErrorKind::Dimension, "threshold_heatmap: empty heatmap");
    BinaryMask out(heatmap.width, heatmap.height);
    auto bits = out.bits();
    const int w = heatmap.width;
    parallel::for_each_row(heatmap.height, [&](std::ptrdiff_t y) {
        const std::size_t row = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) bits[row + x] = heatmap.values[row + x] > thresh ? 1 : 0;
    });
    return out;
}

Labeling label_components(const BinaryMask& mask, Connectivity conn) {
    const int w = mask.width();
    const int h = mask.height();
    const int n_dirs = conn == Connectivity::Eight ? 8 : 4;
    Labeling out{w, h, std::vector<int>(mask.size(), 0), {}};
    std::vector<int> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            if (!mask.bits()[idx] || out.labels[idx]) continue;
            Component comp;
            comp.label = static_cast<int>(out.components.size()) + 1;
            comp.bounding_box = {x, y, x, y};
            out.labels[idx] = comp.label;
            stack.assign(1, static_cast<int>(idx));
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                const int cx = cur % w;
                const int cy = cur / w;
                ++comp.pixel_count;
                auto& bb = comp.bounding_box;
                bb.x0 = std::min(bb.x0, cx);
                bb.x1 = std::max(bb.x1, cx);
                bb.y0 = std::min(bb.y0, cy);
                bb.y1 = std::max(bb.y1, cy);
                if (cx == 0 || cy == 0 || cx == w - 1 || cy == h - 1) comp.touches_border = true;
                for (int d = 0; d < n_dirs; ++d) {
                    const int nx = cx + kDx[d];
                    const int ny = cy + kDy[d];
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                    if (mask.bits()[nidx] && !out.labels[nidx]) {
                        out.labels[nidx] = comp.label;
                        stack.push_back(static_cast<int>(nidx));
                    }
                }
            }
            out.components.push_back(comp);
        }
    }
    return out;
}

std::vector<Component> connected_components(const BinaryMask& mask, Connectivity conn) {
    return label_components(mask, conn).components;
}

namespace {

BinaryMask keep_labels(const Labeling& lab, const std::vector<char>& keep) {
    BinaryMask out(lab.width, lab.height);
    auto bits = out.bits();
    for (std::size_t i = 0; i < lab.labels.size(); ++i)
        bits[i] = lab.labels[i] && keep[static_cast<std::size_t>(lab.labels[i])] ? 1 : 0;
    return out;
}

void check_frac(double f) {
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::Range, "min_area_frac must be in [0,1]");
}

}  // namespace

BinaryMask refine_mask(const BinaryMask& mask, double min_area_frac, Connectivity conn) {
    check_frac(min_area_frac);
    const Labeling lab = label_components(mask, conn);
    const double min_area = min_area_frac * static_cast<double>(mask.size());
    std::vector<char> keep(lab.components.size() + 1, 0);
    for (const auto& c : lab.components)
        keep[static_cast<std::size_t>(c.label)] = static_cast<double>(c.pixel_count) >= min_area;
    return keep_labels(lab, keep);
}

BinaryMask refine_mask(const BinaryMask& mask, const GrayImage& source, const RefineOptions& opts) {
    check_frac(opts.min_area_frac);
    if (source.width != mask.width() || source.height != mask.height())
        fail(ErrorKind::Dimension, "refine_mask: source frame and mask dimensions differ");
    const Labeling lab = label_components(mask, opts.connectivity);
    std::vector<double> intensity(lab.components.size() + 1, 0.0);
    for (std::size_t i = 0; i < lab.labels.size(); ++i)
        if (lab.labels[i]) intensity[static_cast<std::size_t>(lab.labels[i])] += source.pixels[i];

    const double min_area = opts.min_area_frac * static_cast<double>(mask.size());
    std::vector<char> keep(lab.components.size() + 1, 0);
    for (const auto& c : lab.components) {
        const double mean = intensity[static_cast<std::size_t>(c.label)] / static_cast<double>(c.pixel_count);
        const bool dark_frame = c.touches_border && mean <= opts.dark_border_max_mean;
        keep[static_cast<std::size_t>(c.label)] =
            !dark_frame && static_cast<double>(c.pixel_count) >= min_area;
    }
    return keep_labels(lab, keep);
}

BinaryMask union_masks(std::span<const BinaryMask> masks) {
    if (masks.empty()) fail(ErrorKind::Contract, "union_masks: empty list");
    BinaryMask out = masks.front();
    auto dst = out.bits();
    for (std::size_t m = 1; m < masks.size(); ++m) {
        require_same_shape(out, masks[m], "union_masks");
        auto src = masks[m].bits();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
    }
    return out;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "iou");
    auto pa = a.bits();
    auto pb = b.bits();
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        inter += pa[i] & pb[i];
        uni += pa[i] | pb[i];
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> iou_many(std::span<const BinaryMask> a, std::span<const BinaryMask> b) {
    if (a.size() != b.size()) fail(ErrorKind::Contract, "iou_many: lists differ in length");
    for (std::size_t i = 0; i < a.size(); ++i) require_same_shape(a[i], b[i], "iou_many");
    std::vector<double> out(a.size(), 0.0);
    parallel::for_each_index(static_cast<std::ptrdiff_t>(a.size()),
                             [&](std::ptrdiff_t i) { out[static_cast<std::size_t>(i)] = iou(a[i], b[i]); });
    return out;
}

}  // namespace medvqa::imaging
