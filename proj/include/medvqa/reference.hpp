#pragma once

// Single-threaded reference versions of the parallel kernels. They share no
// code with the optimized paths and exist for equivalence tests and the
// benchmark.

#include <span>
#include <string>
#include <vector>

#include "medvqa/eval/text_metrics.hpp"
#include "medvqa/imaging/binary_mask.hpp"
#include "medvqa/imaging/contour.hpp"

namespace medvqa::reference {

imaging::BinaryMask threshold_mask(const imaging::GrayImage& image, int thresh);

double iou(const imaging::BinaryMask& a, const imaging::BinaryMask& b);
std::vector<double> iou_many(std::span<const imaging::BinaryMask> a, std::span<const imaging::BinaryMask> b);

// Per-pixel crossing-number test of each pixel center against every polygon.
imaging::BinaryMask rasterize(const std::vector<imaging::Polygon>& polygons, int width, int height);

eval::CorpusScores corpus_scores(const std::vector<std::string>& hypotheses,
                                 const std::vector<std::string>& references);

}  // namespace medvqa::reference
