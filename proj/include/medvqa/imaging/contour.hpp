#pragma once

#include <vector>

#include "medvqa/imaging/binary_mask.hpp"
#include "medvqa/imaging/ops.hpp"

namespace medvqa::imaging {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Closed implicitly; at least three vertices. Coordinates live on the pixel
// corner lattice, so (0,0) is the top-left corner of pixel (0,0) and
// (width,height) the bottom-right corner of the last pixel.
struct Polygon {
    std::vector<Point> vertices;

    double signed_area() const;
    friend bool operator==(const Polygon&, const Polygon&) = default;
};

// Outer boundary of every component, largest component first. Contours run
// along pixel edges; interior holes are filled. Douglas-Peucker with
// tolerance simplify_eps is then applied (eps = 0 only drops collinear
// vertices, which leaves the shape unchanged).
std::vector<Polygon> extract_polygons(const BinaryMask& mask, double simplify_eps,
                                      Connectivity conn = Connectivity::Eight);

// Douglas-Peucker on a closed ring. Never returns fewer than three vertices
// when the input has at least three.
Polygon simplify_polygon(const Polygon& poly, double eps);

struct RasterStats {
    std::size_t clamped_vertices = 0;
};

// Even-odd scanline fill per polygon with a pixel-center test, OR-ed across
// polygons. Vertices outside [0,width]x[0,height] are clamped and counted.
BinaryMask rasterize(const std::vector<Polygon>& polygons, int width, int height,
                     RasterStats* stats = nullptr);

}  // namespace medvqa::imaging
