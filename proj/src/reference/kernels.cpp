#include "medvqa/reference.hpp"

#include <algorithm>

#include "medvqa/error.hpp"

namespace medvqa::reference {

using imaging::BinaryMask;

BinaryMask threshold_mask(const imaging::GrayImage& image, int thresh) {
    if (image.empty() || image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
        fail(ErrorKind::Dimension, "threshold_mask: empty image");
    if (thresh < 0 || thresh > 255) fail(ErrorKind::Range, "threshold_mask: thresh must be in [0,255]");
    BinaryMask out(image.width, image.height);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            out.set(x, y, image.pixels[static_cast<std::size_t>(y) * image.width + x] > thresh);
    return out;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width() != b.width() || a.height() != b.height()) fail(ErrorKind::Dimension, "iou: shape mismatch");
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            const bool pa = a.at(x, y), pb = b.at(x, y);
            inter += pa && pb;
            uni += pa || pb;
        }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> iou_many(std::span<const BinaryMask> a, std::span<const BinaryMask> b) {
    if (a.size() != b.size()) fail(ErrorKind::Contract, "iou_many: lists differ in length");
    std::vector<double> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(reference::iou(a[i], b[i]));
    return out;
}

namespace {

bool inside(const std::vector<imaging::Point>& ring, double px, double py) {
    bool in = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const auto& p = ring[i];
        const auto& q = ring[j];
        if ((p.y > py) != (q.y > py)) {
            const double xi = p.x + (py - p.y) * (q.x - p.x) / (q.y - p.y);
            if (px < xi) in = !in;
        }
    }
    return in;
}

}  // namespace

BinaryMask rasterize(const std::vector<imaging::Polygon>& polygons, int width, int height) {
    BinaryMask out(width, height);
    for (const auto& poly : polygons) {
        std::vector<imaging::Point> ring = poly.vertices;
        if (ring.size() < 3) continue;
        for (auto& p : ring) {
            p.x = std::clamp(p.x, 0.0, static_cast<double>(width));
            p.y = std::clamp(p.y, 0.0, static_cast<double>(height));
        }
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (inside(ring, x + 0.5, y + 0.5)) out.set(x, y, true);
    }
    return out;
}

eval::CorpusScores corpus_scores(const std::vector<std::string>& hypotheses,
                                 const std::vector<std::string>& references) {
    if (hypotheses.size() != references.size()) fail(ErrorKind::Contract, "hypothesis/reference count mismatch");
    if (hypotheses.empty()) fail(ErrorKind::Contract, "empty corpus");
    std::vector<eval::SentenceStats> stats;
    stats.reserve(hypotheses.size());
    for (std::size_t i = 0; i < hypotheses.size(); ++i) stats.push_back(eval::sentence_stats(hypotheses[i], references[i]));
    return eval::reduce_stats(stats);
}

}  // namespace medvqa::reference
