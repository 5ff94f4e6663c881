#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "medvqa/imaging/binary_mask.hpp"
#include "medvqa/imaging/contour.hpp"

namespace medvqa::codec {

inline constexpr int kDefaultBins = 1000;
inline constexpr std::string_view kSeparatorToken = "<sep>";

// Quantized polygon stream: (x-bin, y-bin) pairs, one segment per polygon.
struct LocTokenSeq {
    std::vector<int> bins;
    int num_bins = kDefaultBins;
    // Offsets into bins where the second, third, ... polygon starts.
    std::vector<std::size_t> polygon_breaks;

    std::size_t segment_count() const { return bins.empty() ? 0 : polygon_breaks.size() + 1; }
    friend bool operator==(const LocTokenSeq&, const LocTokenSeq&) = default;
};

// floor(x * num_bins / extent) clamped to [0, num_bins-1].
// Throws Error(Range) for x outside [0, extent].
int encode_coord(double x, double extent, int num_bins = kDefaultBins);
// Bin center: (bin + 0.5) * extent / num_bins.
double decode_coord(int bin, double extent, int num_bins = kDefaultBins);

// Throws Error(Contract) on an empty list or a polygon with < 3 vertices.
LocTokenSeq polygons_to_tokens(const std::vector<imaging::Polygon>& polys, int width, int height,
                               int num_bins = kDefaultBins);
// Throws Error(Parse) naming the segment when a segment is odd-length or
// shorter than three vertices, Error(Range) on an out-of-range bin.
std::vector<imaging::Polygon> tokens_to_polygons(const LocTokenSeq& seq, int width, int height);

// Throws Error(Content) "nothing to ground" on an empty mask. With
// simplify_eps = 0 and width, height < num_bins, tokens_to_mask gives back
// the hole-filled mask exactly.
LocTokenSeq mask_to_tokens(const imaging::BinaryMask& mask, double simplify_eps,
                           int num_bins = kDefaultBins);
imaging::BinaryMask tokens_to_mask(const LocTokenSeq& seq, int width, int height);

// "<loc_12><loc_7>...<sep><loc_3>..."
std::string render_tokens(const LocTokenSeq& seq);

// Pulls every <loc_k> out of free text in order, splitting at <sep>.
// Segments with fewer than six bins are dropped; if none remain the call
// throws Error(Parse) "no parseable region". k >= num_bins throws Error(Range).
LocTokenSeq parse_token_text(std::string_view text, int num_bins = kDefaultBins);

}  // namespace medvqa::codec
