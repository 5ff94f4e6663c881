#include "medvqa/imaging/contour.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "medvqa/error.hpp"
#include "medvqa/parallel.hpp"

namespace medvqa::imaging {

double Polygon::signed_area() const {
    double acc = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = vertices[i];
        const Point& q = vertices[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    return 0.5 * acc;
}

namespace {

// Boundary edge on the pixel-corner lattice of a padded local window.
struct Edge {
    int from = 0;   // vertex index
    int to = 0;     // vertex index
    int owner = 0;  // pixel index the edge belongs to
};

// Traces the outer boundary of one component. Holes are filled first by
// flooding the background from the window border with the complementary
// connectivity, so the traced ring encloses the whole component.
std::vector<Point> trace_outer(const Labeling& lab, const Component& comp, Connectivity conn) {
    const auto& bb = comp.bounding_box;
    const int lw = bb.x1 - bb.x0 + 3;  // one pixel of padding on each side
    const int lh = bb.y1 - bb.y0 + 3;
    auto local = [&](int x, int y) { return static_cast<std::size_t>(y) * lw + x; };

    std::vector<std::uint8_t> inside(static_cast<std::size_t>(lw) * lh, 1);
    std::vector<std::uint8_t> fg(inside.size(), 0);
    for (int y = bb.y0; y <= bb.y1; ++y)
        for (int x = bb.x0; x <= bb.x1; ++x)
            if (lab.labels[static_cast<std::size_t>(y) * lab.width + x] == comp.label)
                fg[local(x - bb.x0 + 1, y - bb.y0 + 1)] = 1;

    // Background flood from the padding ring.
    const bool bg_eight = conn == Connectivity::Four;
    std::vector<int> stack{0};
    inside[0] = 0;
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % lw;
        const int cy = cur / lw;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                if (!bg_eight && dx != 0 && dy != 0) continue;
                const int nx = cx + dx;
                const int ny = cy + dy;
                if (nx < 0 || ny < 0 || nx >= lw || ny >= lh) continue;
                const std::size_t n = local(nx, ny);
                if (inside[n] && !fg[n]) {
                    inside[n] = 0;
                    stack.push_back(static_cast<int>(n));
                }
            }
        }
    }

    // Vertex lattice is (lw+1) x (lh+1).
    const int vw = lw + 1;
    auto vid = [&](int x, int y) { return y * vw + x; };
    auto in = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < lw && y < lh && inside[local(x, y)];
    };

    std::vector<Edge> edges;
    std::vector<std::array<int, 2>> outgoing(static_cast<std::size_t>(vw) * (lh + 1), {-1, -1});
    auto add = [&](int from, int to, int owner) {
        auto& slot = outgoing[static_cast<std::size_t>(from)];
        slot[slot[0] < 0 ? 0 : 1] = static_cast<int>(edges.size());
        edges.push_back({from, to, owner});
    };
    int start_edge = -1;
    for (int y = 0; y < lh; ++y) {
        for (int x = 0; x < lw; ++x) {
            if (!in(x, y)) continue;
            const int owner = static_cast<int>(local(x, y));
            // clockwise on screen (y down): interior to the right of travel
            if (!in(x, y - 1)) {
                if (start_edge < 0) start_edge = static_cast<int>(edges.size());
                add(vid(x, y), vid(x + 1, y), owner);
            }
            if (!in(x + 1, y)) add(vid(x + 1, y), vid(x + 1, y + 1), owner);
            if (!in(x, y + 1)) add(vid(x + 1, y + 1), vid(x, y + 1), owner);
            if (!in(x - 1, y)) add(vid(x, y + 1), vid(x, y), owner);
        }
    }

    std::vector<Point> ring;
    std::vector<std::uint8_t> used(edges.size(), 0);
    int e = start_edge;
    while (e >= 0 && !used[static_cast<std::size_t>(e)]) {
        used[static_cast<std::size_t>(e)] = 1;
        const Edge& cur = edges[static_cast<std::size_t>(e)];
        ring.push_back({static_cast<double>(cur.from % vw - 1 + bb.x0),
                        static_cast<double>(cur.from / vw - 1 + bb.y0)});
        const auto& next = outgoing[static_cast<std::size_t>(cur.to)];
        if (next[1] < 0) {
            e = next[0];
        } else {
            // Saddle vertex: two diagonal pixels meet at a corner. Eight-
            // connectivity hops to the other pixel, four-connectivity stays.
            const bool first_same = edges[static_cast<std::size_t>(next[0])].owner == cur.owner;
            const bool hop = conn == Connectivity::Eight;
            e = (first_same != hop) ? next[0] : next[1];
        }
    }
    return ring;
}

double point_line_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    const double cross = std::abs(dx * (p.y - a.y) - dy * (p.x - a.x));
    return cross / std::sqrt(len2);
}

// Open-chain Douglas-Peucker; marks kept interior points in keep[first..last].
void douglas_peucker(const std::vector<Point>& pts, std::size_t first, std::size_t last, double eps,
                     std::vector<char>& keep) {
    std::vector<std::pair<std::size_t, std::size_t>> work{{first, last}};
    while (!work.empty()) {
        auto [lo, hi] = work.back();
        work.pop_back();
        if (hi <= lo + 1) continue;
        double best = -1.0;
        std::size_t best_i = lo;
        for (std::size_t i = lo + 1; i < hi; ++i) {
            const double d = point_line_distance(pts[i], pts[lo], pts[hi % pts.size()]);
            if (d > best) {
                best = d;
                best_i = i;
            }
        }
        if (best > eps) {
            keep[best_i] = 1;
            work.emplace_back(lo, best_i);
            work.emplace_back(best_i, hi);
        }
    }
}

}  // namespace

Polygon simplify_polygon(const Polygon& poly, double eps) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n <= 3) return poly;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = std::hypot(v[i].x - v[0].x, v[i].y - v[0].y);
        if (d > far_d) {
            far_d = d;
            far = i;
        }
    }
    std::vector<char> keep(n, 0);
    keep[0] = 1;
    keep[far] = 1;
    douglas_peucker(v, 0, far, eps, keep);
    douglas_peucker(v, far, n, eps, keep);  // index n wraps to vertex 0

    Polygon out;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.vertices.push_back(v[i]);
    if (out.vertices.size() < 3) {
        // Tolerance swallowed the shape; keep the widest triangle on the chord.
        std::size_t third = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == 0 || i == far) continue;
            const double d = point_line_distance(v[i], v[0], v[far]);
            if (d > best) {
                best = d;
                third = i;
            }
        }
        std::array<std::size_t, 3> idx{0, far, third};
        std::sort(idx.begin(), idx.end());
        out.vertices = {v[idx[0]], v[idx[1]], v[idx[2]]};
    }
    return out;
}

std::vector<Polygon> extract_polygons(const BinaryMask& mask, double simplify_eps, Connectivity conn) {
    if (simplify_eps < 0.0) fail(ErrorKind::Range, "simplify_eps must be >= 0");
    const Labeling lab = label_components(mask, conn);
    std::vector<Component> order = lab.components;
    std::stable_sort(order.begin(), order.end(), [](const Component& a, const Component& b) {
        return a.pixel_count > b.pixel_count;
    });
    std::vector<Polygon> out(order.size());
    parallel::for_each_index(static_cast<std::ptrdiff_t>(order.size()), [&](std::ptrdiff_t i) {
        Polygon ring{trace_outer(lab, order[static_cast<std::size_t>(i)], conn)};
        out[static_cast<std::size_t>(i)] = simplify_polygon(ring, simplify_eps);
    });
    return out;
}

BinaryMask rasterize(const std::vector<Polygon>& polygons, int width, int height, RasterStats* stats) {
    BinaryMask out(width, height);
    std::size_t clamped = 0;
    std::vector<std::vector<Point>> rings;
    rings.reserve(polygons.size());
    for (const auto& poly : polygons) {
        std::vector<Point> ring = poly.vertices;
        for (auto& p : ring) {
            const Point c{std::clamp(p.x, 0.0, static_cast<double>(width)),
                          std::clamp(p.y, 0.0, static_cast<double>(height))};
            if (!(c == p)) ++clamped;
            p = c;
        }
        if (ring.size() >= 3) rings.push_back(std::move(ring));
    }
    if (stats) stats->clamped_vertices = clamped;

    auto bits = out.bits();
    parallel::for_each_row(height, [&](std::ptrdiff_t y) {
        const double yc = static_cast<double>(y) + 0.5;
        std::vector<double> xs;
        for (const auto& ring : rings) {
            xs.clear();
            const std::size_t n = ring.size();
            for (std::size_t i = 0; i < n; ++i) {
                const Point& p = ring[i];
                const Point& q = ring[(i + 1) % n];
                if ((p.y > yc) != (q.y > yc)) xs.push_back(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
            }
            std::sort(xs.begin(), xs.end());
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                // pixel x is in when its center lies in [xs[k], xs[k+1])
                const int x_begin = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
                const int x_end = std::min(width, static_cast<int>(std::ceil(xs[k + 1] - 0.5)));
                for (int x = x_begin; x < x_end; ++x)
                    bits[static_cast<std::size_t>(y) * width + x] = 1;
            }
        }
    });
    return out;
}

}  // namespace medvqa::imaging
