#pragma once

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "polygon.hpp"

namespace crossfoam {

namespace detail {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, /*ClockWise=*/false>;
using BgMulti = bg::model::multi_polygon<BgPolygon>;

/// orientation-corrected conversion; loops are grouped by containment
inline BgMulti toBoost(const Polygons& in)
{
    // split into outers and holes by signed area, assign holes to containing outers
    std::vector<const Polygon*> outers, holes;
    for (const Polygon& p : in.polys)
    {
        if (p.size() < 3)
            continue;
        (p.isCounterClockwise() ? outers : holes).push_back(&p);
    }
    BgMulti multi;
    for (const Polygon* o : outers)
    {
        BgPolygon poly;
        for (const Point2& pt : o->points)
            bg::append(poly.outer(), BgPoint(toMm(pt.x), toMm(pt.y)));
        bg::append(poly.outer(), BgPoint(toMm(o->points[0].x), toMm(o->points[0].y)));
        for (const Polygon* h : holes)
        {
            Polygons outer_only;
            outer_only.add(*o);
            if (pointInside(outer_only, h->points[0]))
            {
                poly.inners().emplace_back();
                for (const Point2& pt : h->points)
                    bg::append(poly.inners().back(), BgPoint(toMm(pt.x), toMm(pt.y)));
                bg::append(poly.inners().back(), BgPoint(toMm(h->points[0].x), toMm(h->points[0].y)));
            }
        }
        bg::correct(poly);
        multi.push_back(std::move(poly));
    }
    return multi;
}

inline Polygons fromBoost(const BgMulti& multi, double min_area_mm2 = 1e-6)
{
    Polygons out;
    auto convertRing = [&](const auto& ring, bool hole) {
        Polygon p;
        for (const auto& pt : ring)
            p.points.push_back({fromMm(bg::get<0>(pt)), fromMm(bg::get<1>(pt))});
        if (!p.points.empty() && p.points.front() == p.points.back())
            p.points.pop_back();
        // drop collinear duplicates
        std::vector<Point2> clean;
        size_t n = p.points.size();
        for (size_t i = 0; i < n; i++)
        {
            Point2 prev = p.points[(i + n - 1) % n];
            Point2 cur = p.points[i];
            if (clean.empty() || !(clean.back() == cur))
                if (!(prev == cur))
                    clean.push_back(cur);
        }
        p.points = std::move(clean);
        if (p.points.size() < 3 || std::abs(p.areaMm2()) < min_area_mm2)
            return;
        if (hole == p.isCounterClockwise())
            p.reverse();
        out.add(std::move(p));
    };
    for (const BgPolygon& poly : multi)
    {
        convertRing(poly.outer(), false);
        for (const auto& inner : poly.inners())
            convertRing(inner, true);
    }
    return out;
}

} // namespace detail

/*!
 * Offset a polygon set: positive delta grows, negative shrinks.  Loops that
 * vanish are dropped; output keeps the outer-CCW / hole-CW convention.
 */
inline Polygons offsetPolygons(const Polygons& in, coord_t delta)
{
    if (in.empty() || delta == 0)
        return in;
    namespace bg = boost::geometry;
    detail::BgMulti src = detail::toBoost(in);
    detail::BgMulti result;
    double d = toMm(delta);
    bg::strategy::buffer::distance_symmetric<double> distance(d);
    bg::strategy::buffer::join_miter join(4.0);
    bg::strategy::buffer::end_flat end;
    bg::strategy::buffer::point_square point;
    bg::strategy::buffer::side_straight side;
    bg::buffer(src, result, distance, side, join, end, point);
    return detail::fromBoost(result);
}

inline Polygons polygonsDifference(const Polygons& a, const Polygons& b)
{
    detail::BgMulti ma = detail::toBoost(a);
    detail::BgMulti mb = detail::toBoost(b);
    detail::BgMulti out;
    boost::geometry::difference(ma, mb, out);
    return detail::fromBoost(out);
}

inline Polygons polygonsIntersection(const Polygons& a, const Polygons& b)
{
    detail::BgMulti ma = detail::toBoost(a);
    detail::BgMulti mb = detail::toBoost(b);
    detail::BgMulti out;
    boost::geometry::intersection(ma, mb, out);
    return detail::fromBoost(out);
}

} // namespace crossfoam
