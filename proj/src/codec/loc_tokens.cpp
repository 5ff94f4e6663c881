#include "medvqa/codec/loc_tokens.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "medvqa/error.hpp"

namespace medvqa::codec {

using imaging::Point;
using imaging::Polygon;

namespace {

void check_bins(int num_bins) {
    if (num_bins < 2) fail(ErrorKind::Contract, "num_bins must be >= 2");
}

void check_extent(double extent) {
    if (!(extent > 0.0)) fail(ErrorKind::Contract, "extent must be > 0");
}

}  // namespace

int encode_coord(double x, double extent, int num_bins) {
    check_extent(extent);
    check_bins(num_bins);
    if (!(x >= 0.0 && x <= extent))
        fail(ErrorKind::Range, "coordinate " + std::to_string(x) + " outside [0, " +
                                   std::to_string(extent) + "]");
    const double q = std::floor(x * num_bins / extent);
    return std::clamp(static_cast<int>(q), 0, num_bins - 1);
}

double decode_coord(int bin, double extent, int num_bins) {
    check_extent(extent);
    check_bins(num_bins);
    if (bin < 0 || bin >= num_bins)
        fail(ErrorKind::Range, "bin " + std::to_string(bin) + " outside [0, " +
                                   std::to_string(num_bins - 1) + "]");
    return (bin + 0.5) * extent / num_bins;
}

LocTokenSeq polygons_to_tokens(const std::vector<Polygon>& polys, int width, int height, int num_bins) {
    if (polys.empty()) fail(ErrorKind::Contract, "polygons_to_tokens: empty polygon list");
    check_bins(num_bins);
    LocTokenSeq seq;
    seq.num_bins = num_bins;
    for (std::size_t i = 0; i < polys.size(); ++i) {
        if (polys[i].vertices.size() < 3)
            fail(ErrorKind::Contract, "polygon " + std::to_string(i) + " has fewer than 3 vertices");
        if (i > 0) seq.polygon_breaks.push_back(seq.bins.size());
        for (const Point& p : polys[i].vertices) {
            seq.bins.push_back(encode_coord(p.x, width, num_bins));
            seq.bins.push_back(encode_coord(p.y, height, num_bins));
        }
    }
    return seq;
}

namespace {

// Segment boundaries as [begin, end) pairs.
std::vector<std::pair<std::size_t, std::size_t>> segments(const LocTokenSeq& seq) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t begin = 0;
    for (std::size_t b : seq.polygon_breaks) {
        if (b < begin || b > seq.bins.size()) fail(ErrorKind::Parse, "polygon_breaks not increasing");
        out.emplace_back(begin, b);
        begin = b;
    }
    out.emplace_back(begin, seq.bins.size());
    return out;
}

}  // namespace

std::vector<Polygon> tokens_to_polygons(const LocTokenSeq& seq, int width, int height) {
    if (seq.bins.empty()) fail(ErrorKind::Parse, "tokens_to_polygons: empty token sequence");
    std::vector<Polygon> out;
    const auto segs = segments(seq);
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const auto [begin, end] = segs[s];
        const std::size_t len = end - begin;
        if (len % 2 != 0)
            fail(ErrorKind::Parse, "segment " + std::to_string(s) + " has odd length " + std::to_string(len));
        if (len < 6)
            fail(ErrorKind::Parse, "segment " + std::to_string(s) + " has fewer than 3 vertices");
        Polygon poly;
        for (std::size_t i = begin; i < end; i += 2)
            poly.vertices.push_back({decode_coord(seq.bins[i], width, seq.num_bins),
                                     decode_coord(seq.bins[i + 1], height, seq.num_bins)});
        out.push_back(std::move(poly));
    }
    return out;
}

LocTokenSeq mask_to_tokens(const imaging::BinaryMask& mask, double simplify_eps, int num_bins) {
    if (mask.empty()) fail(ErrorKind::Content, "nothing to ground: mask is empty");
    return polygons_to_tokens(imaging::extract_polygons(mask, simplify_eps), mask.width(), mask.height(),
                              num_bins);
}

imaging::BinaryMask tokens_to_mask(const LocTokenSeq& seq, int width, int height) {
    return imaging::rasterize(tokens_to_polygons(seq, width, height), width, height);
}

std::string render_tokens(const LocTokenSeq& seq) {
    std::string out;
    out.reserve(seq.bins.size() * 9);
    std::size_t next_break = 0;
    for (std::size_t i = 0; i < seq.bins.size(); ++i) {
        if (next_break < seq.polygon_breaks.size() && seq.polygon_breaks[next_break] == i) {
            out += kSeparatorToken;
            ++next_break;
        }
        out += "<loc_";
        out += std::to_string(seq.bins[i]);
        out += '>';
    }
    return out;
}

LocTokenSeq parse_token_text(std::string_view text, int num_bins) {
    check_bins(num_bins);
    std::vector<std::vector<int>> segs(1);
    constexpr std::string_view kLoc = "<loc_";
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t loc = text.find(kLoc, pos);
        const std::size_t sep = text.find(kSeparatorToken, pos);
        if (loc == std::string_view::npos && sep == std::string_view::npos) break;
        if (sep < loc) {
            if (!segs.back().empty()) segs.emplace_back();
            pos = sep + kSeparatorToken.size();
            continue;
        }
        const std::size_t digits = loc + kLoc.size();
        std::size_t end = digits;
        while (end < text.size() && text[end] >= '0' && text[end] <= '9') ++end;
        if (end == digits || end >= text.size() || text[end] != '>') {
            pos = digits;  // not a well-formed token, treat as prose
            continue;
        }
        long long value = 0;
        const auto res = std::from_chars(text.data() + digits, text.data() + end, value);
        if (res.ec != std::errc() || value >= num_bins)
            fail(ErrorKind::Range, "location token <loc_" + std::string(text.substr(digits, end - digits)) +
                                       "> outside [0, " + std::to_string(num_bins - 1) + "]");
        segs.back().push_back(static_cast<int>(value));
        pos = end + 1;
    }

    LocTokenSeq seq;
    seq.num_bins = num_bins;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        if (segs[s].size() < 6) continue;
        if (segs[s].size() % 2 != 0)
            fail(ErrorKind::Parse, "segment " + std::to_string(s) + " has odd length " +
                                       std::to_string(segs[s].size()));
        if (!seq.bins.empty()) seq.polygon_breaks.push_back(seq.bins.size());
        seq.bins.insert(seq.bins.end(), segs[s].begin(), segs[s].end());
    }
    if (seq.bins.empty()) fail(ErrorKind::Parse, "no parseable region");
    return seq;
}

}  // namespace medvqa::codec
