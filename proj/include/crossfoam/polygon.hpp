#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fixed.hpp"

namespace crossfoam {

/*! A closed loop of vertices. Outer loops are counterclockwise, holes clockwise. */
struct Polygon
{
    std::vector<Point2> points;

    Polygon() = default;
    explicit Polygon(std::vector<Point2> pts) : points(std::move(pts)) {}

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    Point2& operator[](size_t i) { return points[i]; }
    const Point2& operator[](size_t i) const { return points[i]; }

    /// twice the signed area in unit^2 (exact in 128 bit)
    __int128 area2X() const
    {
        __int128 a = 0;
        for (size_t i = 0; i < points.size(); i++)
        {
            const Point2& p = points[i];
            const Point2& q = points[(i + 1) % points.size()];
            a += static_cast<__int128>(p.x) * q.y - static_cast<__int128>(q.x) * p.y;
        }
        return a;
    }
    double area() const { return static_cast<double>(area2X()) / 2.0; } // unit^2
    double areaMm2() const { return area() / (kUnitsPerMm * static_cast<double>(kUnitsPerMm)); }
    bool isCounterClockwise() const { return area2X() > 0; }
    void reverse() { std::reverse(points.begin(), points.end()); }

    double length() const
    {
        double l = 0;
        for (size_t i = 0; i < points.size(); i++)
            l += vSize(points[(i + 1) % points.size()] - points[i]);
        return l;
    }

    Point2 centroidApprox() const
    {
        Point2 s{0, 0};
        for (const Point2& p : points) s = s + p;
        return points.empty() ? s : s / static_cast<coord_t>(points.size());
    }
};

struct Polygons
{
    std::vector<Polygon> polys;

    size_t size() const { return polys.size(); }
    bool empty() const { return polys.empty(); }
    Polygon& operator[](size_t i) { return polys[i]; }
    const Polygon& operator[](size_t i) const { return polys[i]; }
    void add(Polygon p) { polys.push_back(std::move(p)); }

    double area() const
    {
        double a = 0;
        for (const Polygon& p : polys) a += p.area();
        return a;
    }
};

/*! An open or closed chain of vertices. */
struct Polyline
{
    std::vector<Point2> points;
    bool closed = false;

    double length() const
    {
        double l = 0;
        size_t n = points.size();
        size_t m = closed ? n : (n ? n - 1 : 0);
        for (size_t i = 0; i < m; i++)
            l += vSize(points[(i + 1) % n] - points[i]);
        return l;
    }
};

// ---------------------------------------------------------------------------
// exact predicates

/// even-odd point-in-polygon-set test; boundary points count as inside
inline bool pointInside(const Polygons& area, const Point2& p)
{
    int crossings = 0;
    for (const Polygon& poly : area.polys)
    {
        size_t n = poly.size();
        for (size_t i = 0; i < n; i++)
        {
            Point2 a = poly[i];
            Point2 b = poly[(i + 1) % n];
            if (cross(b - a, p - a) == 0 && dot(p - a, p - b) <= 0)
                return true; // on boundary
            if ((a.y > p.y) != (b.y > p.y))
            {
                // x coordinate of the edge at height p.y, compared to p.x exactly
                __int128 lhs = static_cast<__int128>(b.x - a.x) * (p.y - a.y);
                __int128 rhs = static_cast<__int128>(p.x - a.x) * (b.y - a.y);
                bool left = (b.y > a.y) ? (lhs > rhs) : (lhs < rhs);
                if (left)
                    crossings++;
            }
        }
    }
    return crossings % 2 == 1;
}

/// exact even-odd test for a rational point (px/d, py/d), d > 0
inline bool pointInsideRational(const Polygons& area, __int128 px, __int128 py, __int128 d)
{
    int crossings = 0;
    for (const Polygon& poly : area.polys)
    {
        size_t n = poly.size();
        for (size_t i = 0; i < n; i++)
        {
            Point2 a = poly[i];
            Point2 b = poly[(i + 1) % n];
            __int128 ay = static_cast<__int128>(a.y) * d - py;
            __int128 by = static_cast<__int128>(b.y) * d - py;
            if ((ay > 0) != (by > 0))
            {
                // orientation of (a,b,p): cross(b-a, p-a) with p rational
                __int128 c = (static_cast<__int128>(b.x) - a.x) * (py - static_cast<__int128>(a.y) * d)
                           - (static_cast<__int128>(b.y) - a.y) * (px - static_cast<__int128>(a.x) * d);
                bool left = (by > ay) ? (c > 0) : (c < 0);
                if (left)
                    crossings++;
            }
        }
    }
    return crossings % 2 == 1;
}

// ---------------------------------------------------------------------------
// polyline clipping

namespace detail {

struct Crossing
{
    size_t seg;          // index of the curve segment
    coord_t tNum = 0;    // parameter along the segment, tNum/tDen in [0,1], tDen > 0
    coord_t tDen = 1;
    Point2 rounded;
    size_t areaLoop = 0; // which polygon of the area set was crossed
    size_t areaEdge = 0; // which edge of that polygon
    coord_t uNum = 0;    // parameter along the area edge
    coord_t uDen = 1;

    bool before(const Crossing& o) const
    {
        if (seg != o.seg) return seg < o.seg;
        return static_cast<__int128>(tNum) * o.tDen < static_cast<__int128>(o.tNum) * tDen;
    }
    bool samePos(const Crossing& o) const
    {
        return seg == o.seg && static_cast<__int128>(tNum) * o.tDen == static_cast<__int128>(o.tNum) * tDen;
    }
};

/// all crossings of a closed curve with the area boundary, sorted and deduplicated
inline std::vector<Crossing> curveAreaCrossings(const std::vector<Point2>& pts, const Polygons& area)
{
    const size_t n = pts.size();
    std::vector<Crossing> crossings;
    for (size_t i = 0; i < n; i++)
    {
        Point2 a = pts[i];
        Point2 b = pts[(i + 1) % n];
        Point2 d1 = b - a;
        for (size_t li = 0; li < area.size(); li++)
        {
            const Polygon& poly = area[li];
            size_t m = poly.size();
            for (size_t j = 0; j < m; j++)
            {
                Point2 c = poly[j];
                Point2 e = poly[(j + 1) % m];
                Point2 d2 = e - c;
                coord_t denom = cross(d1, d2);
                if (denom == 0)
                    continue; // parallel; handled by midpoint classification
                coord_t tn = cross(c - a, d2);
                coord_t un = cross(c - a, d1);
                auto inRange = [&](coord_t num) {
                    return denom > 0 ? (num >= 0 && num <= denom) : (num <= 0 && num >= denom);
                };
                if (!inRange(tn) || !inRange(un))
                    continue;
                Crossing cr;
                cr.seg = i;
                cr.tNum = denom > 0 ? tn : -tn;
                cr.tDen = denom > 0 ? denom : -denom;
                cr.uNum = denom > 0 ? un : -un;
                cr.uDen = cr.tDen;
                cr.areaLoop = li;
                cr.areaEdge = j;
                if (cr.tNum == cr.tDen) // crossing at segment end: normalize to next segment start
                {
                    cr.seg = (i + 1) % n;
                    cr.tNum = 0;
                    cr.tDen = 1;
                }
                cr.rounded = lerpRound(a, b, tn, denom);
                crossings.push_back(cr);
            }
        }
    }
    std::sort(crossings.begin(), crossings.end(), [](const Crossing& a, const Crossing& b) { return a.before(b); });
    crossings.erase(std::unique(crossings.begin(), crossings.end(),
                                [](const Crossing& a, const Crossing& b) { return a.samePos(b); }),
                    crossings.end());
    return crossings;
}

struct ClippedPiece
{
    std::vector<Point2> pts;
    Crossing start; // boundary hit at the first point
    Crossing end;   // boundary hit at the last point
};

/// pieces of the closed curve inside the area; empty start/end info when the curve never crosses
struct ClipResult
{
    std::vector<ClippedPiece> pieces;
    bool wholeCurveInside = false;
};

inline ClipResult clipClosedCurve(const std::vector<Point2>& pts, const Polygons& area)
{
    ClipResult res;
    const size_t n = pts.size();
    if (n == 0)
        return res;
    std::vector<Crossing> cr = curveAreaCrossings(pts, area);
    if (cr.size() <= 1)
    {
        // no crossings, or a single tangential touch
        res.wholeCurveInside = pointInside(area, pts[0]);
        return res;
    }
    const size_t k = cr.size();

    // classify the gap after each crossing by an interior probe point of the gap
    std::vector<bool> inside(k);
    for (size_t idx = 0; idx < k; idx++)
    {
        const Crossing& c0 = cr[idx];
        const Crossing& c1 = cr[(idx + 1) % k];
        bool sameSegGap = (idx + 1 < k) && c0.seg == c1.seg;
        __int128 px, py, d;
        size_t w = (c0.seg + 1) % n; // first curve vertex after c0
        if (sameSegGap)
        {
            // midpoint of the two params on the same curve segment
            Point2 a = pts[c0.seg];
            Point2 b = pts[(c0.seg + 1) % n];
            __int128 den = static_cast<__int128>(c0.tDen) * c1.tDen * 2;
            __int128 tm = static_cast<__int128>(c0.tNum) * c1.tDen + static_cast<__int128>(c1.tNum) * c0.tDen;
            px = static_cast<__int128>(a.x) * den + static_cast<__int128>(b.x - a.x) * tm;
            py = static_cast<__int128>(a.y) * den + static_cast<__int128>(b.y - a.y) * tm;
            d = den;
        }
        else if (c1.seg == w && c1.tNum == 0)
        {
            // gap covers exactly the rest of c0's segment: probe its midpoint
            Point2 a = pts[c0.seg];
            Point2 b = pts[(c0.seg + 1) % n];
            __int128 den = static_cast<__int128>(c0.tDen) * 2;
            __int128 tm = static_cast<__int128>(c0.tNum) + c0.tDen;
            px = static_cast<__int128>(a.x) * den + static_cast<__int128>(b.x - a.x) * tm;
            py = static_cast<__int128>(a.y) * den + static_cast<__int128>(b.y - a.y) * tm;
            d = den;
        }
        else
        {
            // a curve vertex lies strictly inside the gap
            px = pts[w].x;
            py = pts[w].y;
            d = 1;
        }
        inside[idx] = pointInsideRational(area, px, py, d);
    }
    if (std::all_of(inside.begin(), inside.end(), [](bool b) { return b; }))
    {
        res.wholeCurveInside = true; // only tangential touches
        return res;
    }

    // emit runs of inside gaps as pieces (runs merge through tangential touches)
    auto appendPoint = [](std::vector<Point2>& v, const Point2& p) {
        if (v.empty() || !(v.back() == p))
            v.push_back(p);
    };
    for (size_t idx = 0; idx < k; idx++)
    {
        if (!inside[idx] || inside[(idx + k - 1) % k])
            continue; // not the start of an inside run
        ClippedPiece piece;
        piece.start = cr[idx];
        piece.pts.push_back(cr[idx].rounded);
        size_t g = idx;
        do
        {
            const Crossing& c0 = cr[g];
            const Crossing& c1 = cr[(g + 1) % k];
            // consecutive sorted crossings on one segment have no curve vertex
            // between them, except for the wrapped pair (last -> first)
            bool noVertexBetween = (g + 1 < k) && c0.seg == c1.seg;
            if (!noVertexBetween)
            {
                size_t v = (c0.seg + 1) % n;
                for (size_t guard = 0; guard <= n; guard++)
                {
                    if (v == c1.seg && c1.tNum == 0)
                        break; // (v,0) is c1 itself
                    appendPoint(piece.pts, pts[v]);
                    if (v == c1.seg)
                        break; // c1 lies within segment v, past the vertex
                    v = (v + 1) % n;
                }
            }
            appendPoint(piece.pts, c1.rounded);
            g = (g + 1) % k;
        } while (inside[g]);
        piece.end = cr[g];
        if (piece.pts.size() >= 2)
            res.pieces.push_back(std::move(piece));
    }
    return res;
}

} // namespace detail

/*!
 * Cut a closed polyline against a polygon set.  Returns the sub-polylines that
 * lie inside; a curve entirely inside comes back as one closed polyline.
 * Crossing vertices are inserted exactly once (exact rational parameters).
 */
inline std::vector<Polyline> clipPolylineToArea(const Polyline& curve, const Polygons& area)
{
    detail::ClipResult r = detail::clipClosedCurve(curve.points, area);
    std::vector<Polyline> out;
    if (r.wholeCurveInside)
    {
        Polyline p;
        p.points = curve.points;
        p.closed = true;
        out.push_back(std::move(p));
        return out;
    }
    for (detail::ClippedPiece& piece : r.pieces)
    {
        Polyline p;
        p.points = std::move(piece.pts);
        p.closed = false;
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// distances

inline double pointSegmentDistance(const Point2& p, const Point2& a, const Point2& b)
{
    Point2 ab = b - a;
    coord_t len2 = vSize2(ab);
    if (len2 == 0)
        return vSize(p - a);
    double t = static_cast<double>(dot(p - a, ab)) / static_cast<double>(len2);
    t = std::clamp(t, 0.0, 1.0);
    double qx = a.x + t * ab.x;
    double qy = a.y + t * ab.y;
    double dx = p.x - qx;
    double dy = p.y - qy;
    return std::sqrt(dx * dx + dy * dy);
}

inline double segmentSegmentDistance(const Point2& a, const Point2& b, const Point2& c, const Point2& d)
{
    // zero if they intersect
    auto sgn = [](coord_t v) { return (v > 0) - (v < 0); };
    coord_t d1 = sgn(cross(b - a, c - a));
    coord_t d2 = sgn(cross(b - a, d - a));
    coord_t d3 = sgn(cross(d - c, a - c));
    coord_t d4 = sgn(cross(d - c, b - c));
    if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0)
        return 0.0;
    return std::min(std::min(pointSegmentDistance(a, c, d), pointSegmentDistance(b, c, d)),
                    std::min(pointSegmentDistance(c, a, b), pointSegmentDistance(d, a, b)));
}

/// closest point to p on the boundary of a loop, with the index of the segment
inline std::pair<Point2, size_t> closestOnPolygon(const Polygon& poly, const Point2& p)
{
    double best = 1e300;
    Point2 bestPt = poly.points.empty() ? p : poly[0];
    size_t bestSeg = 0;
    for (size_t i = 0; i < poly.size(); i++)
    {
        Point2 a = poly[i];
        Point2 b = poly[(i + 1) % poly.size()];
        Point2 ab = b - a;
        coord_t len2 = vSize2(ab);
        Point2 q = a;
        if (len2 > 0)
        {
            double t = std::clamp(static_cast<double>(dot(p - a, ab)) / len2, 0.0, 1.0);
            q = {a.x + static_cast<coord_t>(std::llround(t * ab.x)),
                 a.y + static_cast<coord_t>(std::llround(t * ab.y))};
        }
        double d = vSize(p - q);
        if (d < best)
        {
            best = d;
            bestPt = q;
            bestSeg = i;
        }
    }
    return {bestPt, bestSeg};
}

/// self-intersection test for a closed chain (x-sorted segment sweep)
inline bool polylineSelfIntersects(const std::vector<Point2>& pts, bool closed = true)
{
    size_t n = pts.size();
    size_t m = closed ? n : n - 1;
    struct Seg { coord_t xlo, xhi; size_t i; };
    std::vector<Seg> segs;
    segs.reserve(m);
    for (size_t i = 0; i < m; i++)
    {
        Point2 a = pts[i], b = pts[(i + 1) % n];
        segs.push_back({std::min(a.x, b.x), std::max(a.x, b.x), i});
    }
    std::sort(segs.begin(), segs.end(), [](const Seg& a, const Seg& b) { return a.xlo < b.xlo; });
    for (size_t i = 0; i < segs.size(); i++)
    {
        for (size_t j = i + 1; j < segs.size() && segs[j].xlo <= segs[i].xhi; j++)
        {
            size_t si = segs[i].i, sj = segs[j].i;
            size_t lo = std::min(si, sj), hi = std::max(si, sj);
            bool adjacent = (hi == lo + 1) || (closed && lo == 0 && hi == m - 1);
            if (adjacent)
                continue;
            Point2 a = pts[si], b = pts[(si + 1) % n];
            Point2 c = pts[sj], d = pts[(sj + 1) % n];
            if (segmentSegmentDistance(a, b, c, d) == 0.0)
                return true;
        }
    }
    return false;
}

} // namespace crossfoam
