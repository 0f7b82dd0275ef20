#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "fixed.hpp"

namespace crossfoam {

/*
 * The infill structure is a hybrid of a subdivision tree and a connectivity
 * graph over prism-shaped cells.  A cell's base is a right isosceles triangle;
 * Q-prisms (quarter cubes) sit at even depth and subdivide 1:4 into H-prisms
 * (half cubes, odd depth), which subdivide 1:2 into Q-prisms.  Each cell
 * carries a triangular patch of the space-filling surface, characterized by
 *  - the route: which two side faces the patch crosses
 *      A: both catheti, L: hypotenuse and left cathetus, R: hypotenuse and
 *      right cathetus ('left'/'right' seen along the traversal direction),
 *  - the traversal direction (+ for H-prisms, - for Q-prisms),
 *  - the embedding: whether the sliced segment moves from the right of the
 *    traversal direction to the left as z increases (expanding, E) or the
 *    reverse (contracting, C).
 * That makes 12 constructible cell kinds.  The patch pinches to a point at
 * the corner shared by its two route faces at either the cell top or bottom;
 * see apexTop().
 */

enum class Route : uint8_t { A, L, R };

enum Side : uint8_t { kSideLeft = 0, kSideRight = 1, kSideUp = 2, kSideDown = 3 };
inline Side opposite(Side s)
{
    switch (s)
    {
        case kSideLeft: return kSideRight;
        case kSideRight: return kSideLeft;
        case kSideUp: return kSideDown;
        default: return kSideUp;
    }
}

using cell_idx = int32_t;
inline constexpr cell_idx kNoCell = -1;

struct CellKind
{
    bool is_quarter;  // Q-prism (even depth) vs H-prism
    Route route;
    bool expanding;   // E-embedding vs C

    bool plusDirection() const { return !is_quarter; } // H-prisms travel +, Q-prisms -

    std::string str() const
    {
        std::string s;
        s += is_quarter ? 'Q' : 'H';
        s += expanding ? 'E' : 'C';
        s += route == Route::A ? 'A' : route == Route::L ? 'L' : 'R';
        s += plusDirection() ? '+' : '-';
        return s;
    }
};

struct PrismCell
{
    // base triangle, clockwise: right-angle corner, then the corners ending
    // the right and left catheti
    Point2 straight_corner;
    Point2 right_corner;
    Point2 left_corner;
    coord_t z0 = 0;
    coord_t z1 = 0;
    int16_t depth = 0;
    Route route = Route::A;
    bool expanding = false;

    std::array<cell_idx, 4> children{kNoCell, kNoCell, kNoCell, kNoCell};
    std::array<std::vector<cell_idx>, 4> links; // left, right, up, down neighbor leaves

    // dithering bookkeeping
    double error_mass = 0.0; // mm^3 diffused into this cell
    bool processed = false;

    bool isLeaf() const { return children[0] == kNoCell; }
    bool isQuarter() const { return depth % 2 == 0; }
    CellKind kind() const { return {isQuarter(), route, expanding}; }

    double cathetusMm() const { return toMm(static_cast<coord_t>(vSize(right_corner - straight_corner))); }
    double heightMm() const { return toMm(z1 - z0); }
    double volumeMm3() const
    {
        double c = cathetusMm();
        return c * c / 2.0 * heightMm();
    }

    /// the corner shared by the two route faces; the patch pinches here
    Point2 pivot() const
    {
        switch (route)
        {
            case Route::A: return straight_corner;
            case Route::L: return left_corner;
            default: return right_corner;
        }
    }

    /// route faces as (pivot, far) plan segments, in traversal order
    std::pair<Point2, Point2> entryFace() const
    {
        bool plus = !isQuarter();
        switch (route)
        {
            case Route::A: return plus ? std::pair{straight_corner, left_corner} : std::pair{straight_corner, right_corner};
            case Route::L: return plus ? std::pair{left_corner, straight_corner} : std::pair{left_corner, right_corner};
            default:       return plus ? std::pair{right_corner, left_corner} : std::pair{right_corner, straight_corner};
        }
    }
    std::pair<Point2, Point2> exitFace() const
    {
        bool plus = !isQuarter();
        switch (route)
        {
            case Route::A: return plus ? std::pair{straight_corner, right_corner} : std::pair{straight_corner, left_corner};
            case Route::L: return plus ? std::pair{left_corner, right_corner} : std::pair{left_corner, straight_corner};
            default:       return plus ? std::pair{right_corner, straight_corner} : std::pair{right_corner, left_corner};
        }
    }

    /*!
     * Whether the patch pinches at the cell top (true) or bottom.  Same-depth
     * neighbors share identical patch edges exactly when this bit follows
     * expanding ^ g(shape, route); validated by the uniform slicing tests.
     */
    bool apexTop() const
    {
        bool g = (isQuarter() && route != Route::A) || (!isQuarter() && route == Route::A);
        return !expanding != g; // xor
    }
};

/*! Production table: child routes of a subdivided cell, in traversal order. */
struct SubdivisionRules
{
    // closure of the route algebra: the exit face of the first child is the
    // internal face, which is the entry face of the second
    static std::pair<Route, Route> childRoutes(Route r, bool plus)
    {
        switch (r)
        {
            case Route::A: return plus ? std::pair{Route::L, Route::R} : std::pair{Route::R, Route::L};
            case Route::L: return plus ? std::pair{Route::L, Route::A} : std::pair{Route::A, Route::L};
            default:       return plus ? std::pair{Route::A, Route::R} : std::pair{Route::R, Route::A};
        }
    }
};

class SubdivisionForest
{
public:
    std::vector<PrismCell> cells;
    std::array<cell_idx, 4> roots{};
    coord_t l_init = 0;       // side length of the starting cube
    coord_t line_width = 0;   // extrusion width w
    int max_depth = 0;
    Point3 origin{};          // minimal corner of the starting cube

    SubdivisionForest() = default;

    /*!
     * Four quarter-cube A-route cells whose patches form a pyramid; the level-0
     * slice is the square of their four hypotenuse-to-cathetus segments.
     * l_init must be a power-of-two multiple of the line width.
     */
    SubdivisionForest(coord_t l_init, coord_t line_width, int max_depth, Point3 origin = {})
        : l_init(l_init), line_width(line_width), max_depth(max_depth), origin(origin)
    {
        if (line_width <= 0 || l_init <= 0 || l_init % line_width != 0
            || !std::has_single_bit(static_cast<uint64_t>(l_init / line_width)))
            throw std::invalid_argument("starting cube side must be a power-of-two multiple of the line width");
        Point2 o = origin.flatten();
        Point2 center = o + Point2{l_init / 2, l_init / 2};
        Point2 sw = o;
        Point2 nw = o + Point2{0, l_init};
        Point2 ne = o + Point2{l_init, l_init};
        Point2 se = o + Point2{l_init, 0};
        // clockwise traversal: bottom cell travels west, then left, top, right
        std::array<std::pair<Point2, Point2>, 4> pr = {{{se, sw}, {sw, nw}, {nw, ne}, {ne, se}}};
        for (int i = 0; i < 4; i++)
        {
            PrismCell cell;
            cell.straight_corner = center;
            cell.right_corner = pr[i].first;
            cell.left_corner = pr[i].second;
            cell.z0 = origin.z;
            cell.z1 = origin.z + l_init;
            cell.depth = 0;
            cell.route = Route::A;
            cell.expanding = false;
            roots[i] = static_cast<cell_idx>(cells.size());
            cells.push_back(std::move(cell));
        }
        for (int i = 0; i < 4; i++)
        {
            link(roots[i], roots[(i + 1) % 4], kSideRight);
        }
    }

    PrismCell& cell(cell_idx i) { return cells[i]; }
    const PrismCell& cell(cell_idx i) const { return cells[i]; }

    size_t leafCount() const
    {
        size_t n = 0;
        for (const PrismCell& c : cells)
            if (c.isLeaf())
                n++;
        return n;
    }

    template <typename F>
    void forEachLeaf(F&& f) const
    {
        for (cell_idx i = 0; i < static_cast<cell_idx>(cells.size()); i++)
            if (cells[i].isLeaf())
                f(i);
    }

    /// simplified density of the patch in a cell (Route A carries sqrt(2) more)
    double currentDensity(const PrismCell& c) const
    {
        double factor = c.route == Route::A ? std::numbers::sqrt2 : 1.0;
        return toMm(line_width) / c.cathetusMm() * factor;
    }
    double currentMass(const PrismCell& c) const { return currentDensity(c) * c.volumeMm3(); }
    /// total mass the children would have; x(1 + sqrt(2)/2) for L and R routes
    double massAfterSubdivision(const PrismCell& c) const
    {
        double factor = c.route == Route::A ? 1.0 : 1.0 + std::numbers::sqrt2 / 2.0;
        return currentMass(c) * factor;
    }

    /// deepest level at which the simplified structure is still printable
    /// (smallest prism cathetus >= 2*sqrt(2)*w, a 40% cap)
    static int defaultMaxDepth(coord_t l_init, coord_t line_width)
    {
        int depth = 0;
        // cathetus at depth n is l_init * 2^(-(n+1)/2)
        while (true)
        {
            double cath = toMm(l_init) * std::pow(2.0, -(depth + 2) / 2.0);
            if (cath < 2.0 * std::numbers::sqrt2 * toMm(line_width))
                break;
            depth++;
        }
        return depth;
    }

    /*!
     * Split a leaf according to the production rules, maintaining the
     * constraint that linked leaves differ by at most one level: shallower
     * linked leaves are subdivided first, recursively.
     * Returns the indices of the new children.
     */
    std::vector<cell_idx> subdivide(cell_idx idx)
    {
        if (!cells[idx].isLeaf())
            throw std::logic_error("subdivide: cell is not a leaf");
        if (cells[idx].depth >= max_depth)
            throw std::logic_error("subdivide: max depth exceeded");
        // pre-subdivide shallower linked neighbors (cascades at most one level)
        bool again = true;
        while (again)
        {
            again = false;
            for (int side = 0; side < 4 && !again; side++)
            {
                for (cell_idx n : cells[idx].links[side])
                {
                    if (cells[n].depth < cells[idx].depth)
                    {
                        subdivide(n);
                        again = true;
                        break;
                    }
                }
            }
        }
        return subdivideUnchecked(idx);
    }

    bool isLinkedTo(cell_idx a, cell_idx b) const
    {
        for (int side = 0; side < 4; side++)
            for (cell_idx n : cells[a].links[side])
                if (n == b)
                    return true;
        return false;
    }

private:
    void link(cell_idx a, cell_idx b, Side side)
    {
        cells[a].links[side].push_back(b);
        cells[b].links[opposite(side)].push_back(a);
    }

    std::vector<cell_idx> subdivideUnchecked(cell_idx idx)
    {
        const PrismCell parent = cells[idx]; // copy; the arena may reallocate
        bool plus = !parent.isQuarter();
        auto [route_a, route_b] = SubdivisionRules::childRoutes(parent.route, plus);
        Point2 m = midpoint(parent.right_corner, parent.left_corner);
        // child triangles; the first-traversed child owns the parent's entry face
        PrismCell child_p, child_q;
        child_p.straight_corner = m;
        child_p.right_corner = parent.straight_corner;
        child_p.left_corner = parent.right_corner;
        child_q.straight_corner = m;
        child_q.right_corner = parent.left_corner;
        child_q.left_corner = parent.straight_corner;
        PrismCell first = plus ? child_q : child_p;
        PrismCell second = plus ? child_p : child_q;
        first.route = route_a;
        second.route = route_b;
        first.depth = second.depth = parent.depth + 1;

        std::vector<cell_idx> result;
        if (!parent.isQuarter())
        {
            // H-prism: two side-by-side quarter prisms, same band, embedding inherited
            first.z0 = second.z0 = parent.z0;
            first.z1 = second.z1 = parent.z1;
            first.expanding = second.expanding = parent.expanding;
            cell_idx i0 = append(first), i1 = append(second);
            cells[idx].children = {i0, i1, kNoCell, kNoCell};
            link(i0, i1, kSideRight);
            result = {i0, i1};
        }
        else
        {
            // Q-prism: 2x2 half prisms; the bottom row contracts, the top row
            // expands, so stacked patches chain through the band midline
            coord_t zm = (parent.z0 + parent.z1) / 2;
            PrismCell b0 = first, b1 = second, t0 = first, t1 = second;
            b0.z0 = b1.z0 = parent.z0;
            b0.z1 = b1.z1 = zm;
            t0.z0 = t1.z0 = zm;
            t0.z1 = t1.z1 = parent.z1;
            b0.expanding = b1.expanding = false;
            t0.expanding = t1.expanding = true;
            cell_idx ib0 = append(b0), ib1 = append(b1), it0 = append(t0), it1 = append(t1);
            cells[idx].children = {ib0, ib1, it0, it1};
            link(ib0, ib1, kSideRight);
            link(it0, it1, kSideRight);
            link(ib0, it0, kSideUp);
            link(ib1, it1, kSideUp);
            result = {ib0, ib1, it0, it1};
        }
        redistributeLinks(idx, result);
        return result;
    }

    cell_idx append(const PrismCell& c)
    {
        cells.push_back(c);
        return static_cast<cell_idx>(cells.size() - 1);
    }

    void redistributeLinks(cell_idx idx, const std::vector<cell_idx>& kids)
    {
        for (int side = 0; side < 4; side++)
        {
            std::vector<cell_idx> old = std::move(cells[idx].links[side]);
            cells[idx].links[side].clear();
            for (cell_idx n : old)
            {
                auto& back_links = cells[n].links[opposite(side)];
                back_links.erase(std::find(back_links.begin(), back_links.end(), idx));
                for (cell_idx k : kids)
                {
                    if (adjacentOnSide(cells[k], cells[n], static_cast<Side>(side)))
                        link(k, n, static_cast<Side>(side));
                }
            }
        }
    }

    /// is `b` next to `a` on a's given side, along the space-filling surface
    bool adjacentOnSide(const PrismCell& a, const PrismCell& b, Side side) const
    {
        if (side == kSideUp || side == kSideDown)
        {
            if (side == kSideUp && a.z1 != b.z0)
                return false;
            if (side == kSideDown && a.z0 != b.z1)
                return false;
            return trianglesOverlap(a, b);
        }
        auto fa = side == kSideRight ? a.exitFace() : a.entryFace();
        auto fb = side == kSideRight ? b.entryFace() : b.exitFace();
        if (!segmentsOverlap(fa.first, fa.second, fb.first, fb.second))
            return false;
        return std::min(a.z1, b.z1) > std::max(a.z0, b.z0);
    }

    static bool segmentsOverlap(Point2 a1, Point2 b1, Point2 a2, Point2 b2)
    {
        Point2 d = b1 - a1;
        if (cross(d, a2 - a1) != 0 || cross(d, b2 - a1) != 0)
            return false; // not collinear
        coord_t t0 = dot(d, a2 - a1);
        coord_t t1 = dot(d, b2 - a1);
        if (t0 > t1)
            std::swap(t0, t1);
        return std::min(t1, vSize2(d)) > std::max(t0, static_cast<coord_t>(0));
    }

    static bool trianglesOverlap(const PrismCell& a, const PrismCell& b)
    {
        // cells from one tiling: triangles are equal, nested, or interior-disjoint;
        // test the smaller one's centroid against the bigger triangle (exact, x3)
        const PrismCell& big = a.depth <= b.depth ? a : b;
        const PrismCell& small = a.depth <= b.depth ? b : a;
        __int128 sx = static_cast<__int128>(small.straight_corner.x) + small.right_corner.x + small.left_corner.x;
        __int128 sy = static_cast<__int128>(small.straight_corner.y) + small.right_corner.y + small.left_corner.y;
        auto side = [&](Point2 u, Point2 v) -> __int128 {
            // cross(v-u, centroid/3 - u) scaled by 3
            return (static_cast<__int128>(v.x - u.x)) * (sy - 3 * static_cast<__int128>(u.y))
                 - (static_cast<__int128>(v.y - u.y)) * (sx - 3 * static_cast<__int128>(u.x));
        };
        __int128 d1 = side(big.straight_corner, big.right_corner);
        __int128 d2 = side(big.right_corner, big.left_corner);
        __int128 d3 = side(big.left_corner, big.straight_corner);
        bool has_neg = d1 < 0 || d2 < 0 || d3 < 0;
        bool has_pos = d1 > 0 || d2 > 0 || d3 > 0;
        return !(has_neg && has_pos);
    }
};

} // namespace crossfoam
