#pragma once

#include <ostream>
#include <sstream>

#include "infill.hpp"

namespace crossfoam {

struct PrintProfile
{
    double line_width = 0.38;        // mm
    double layer_height = 0.1;       // mm
    double speed = 25.0;             // mm/s
    double filament_diameter = 2.85; // mm
    double first_layer_z = 0.1;      // mm
    double travel_speed = 120.0;     // mm/s

    coord_t lineWidthUnits() const { return fromMm(line_width); }
    coord_t layerHeightUnits() const { return fromMm(layer_height); }

    /// extrusion length per mm of path (volumetric flow over filament section)
    double extrusionPerMm() const
    {
        double section = std::numbers::pi * filament_diameter * filament_diameter / 4.0;
        return line_width * layer_height / section;
    }
};

namespace detail {

inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5f", v);
    // trim trailing zeros but keep at least one decimal
    std::string s(buf);
    size_t dot = s.find('.');
    size_t last = s.find_last_not_of('0');
    if (last > dot)
        s.erase(last + 1);
    else
        s.erase(dot + 2);
    return s;
}

} // namespace detail

/*!
 * Marlin-flavored G-code, absolute E.  One G1 per segment; no retractions
 * inside a layer.  Closed toolpaths revisit their first vertex.
 */
inline void emitGcode(std::ostream& os, const std::vector<LayerPlan>& plans, const PrintProfile& profile,
                      const std::string& header = "", const std::string& footer = "")
{
    if (header.empty())
    {
        os << "; crossfoam toolpath\n";
        os << "M82 ; absolute extrusion\n";
        os << "G28 ; home\n";
        os << "G92 E0\n";
    }
    else
        os << header;
    double e = 0;
    double flow = profile.extrusionPerMm();
    int feed_print = static_cast<int>(profile.speed * 60);
    int feed_travel = static_cast<int>(profile.travel_speed * 60);
    for (const LayerPlan& plan : plans)
    {
        os << ";LAYER z=" << detail::fmt(toMm(plan.z)) << '\n';
        os << "G0 Z" << detail::fmt(toMm(plan.z) + profile.layer_height) << " F" << feed_travel << '\n';
        auto emitLoop = [&](const Polyline& path) {
            if (path.points.empty())
                return;
            os << "G0 X" << detail::fmt(toMm(path.points[0].x)) << " Y" << detail::fmt(toMm(path.points[0].y))
               << " F" << feed_travel << '\n';
            size_t n = path.points.size();
            size_t count = path.closed ? n : n - 1;
            for (size_t i = 1; i <= count; i++)
            {
                Point2 prev = path.points[(i - 1) % n];
                Point2 cur = path.points[i % n];
                e += vSize(cur - prev) / kUnitsPerMm * flow;
                os << "G1 X" << detail::fmt(toMm(cur.x)) << " Y" << detail::fmt(toMm(cur.y)) << " E"
                   << detail::fmt(e) << " F" << feed_print << '\n';
            }
        };
        emitLoop(plan.outer_wall);
        emitLoop(plan.toolpath);
    }
    if (footer.empty())
    {
        os << "M104 S0 ; cool down\n";
        os << "M140 S0\n";
        os << "G28 X0 Y0\n";
        os << "M84\n";
    }
    else
        os << footer;
}

/*! Per-layer SVG with round caps and joins at stroke width w. */
inline void emitSvg(std::ostream& os, const LayerPlan& plan,
                    const std::vector<std::pair<Point2, double>>* error_tiles = nullptr,
                    double tile_size_mm = 0)
{
    Point2 lo{INT64_MAX, INT64_MAX}, hi{INT64_MIN, INT64_MIN};
    auto grow = [&](const Polyline& p) {
        for (const Point2& pt : p.points)
        {
            lo.x = std::min(lo.x, pt.x); lo.y = std::min(lo.y, pt.y);
            hi.x = std::max(hi.x, pt.x); hi.y = std::max(hi.y, pt.y);
        }
    };
    grow(plan.toolpath);
    grow(plan.outer_wall);
    if (lo.x > hi.x)
        lo = hi = {0, 0};
    double margin = toMm(plan.line_width) * 2 + 1;
    double w = toMm(hi.x - lo.x) + 2 * margin;
    double h = toMm(hi.y - lo.y) + 2 * margin;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << toMm(lo.x) - margin << ' '
       << -toMm(hi.y) - margin << ' ' << w << ' ' << h << "\">\n";
    if (error_tiles && tile_size_mm > 0)
    {
        for (const auto& [corner, err] : *error_tiles)
        {
            double opacity = std::clamp(err * 5.0, 0.0, 1.0);
            os << "<rect x=\"" << toMm(corner.x) << "\" y=\"" << -toMm(corner.y) - tile_size_mm << "\" width=\""
               << tile_size_mm << "\" height=\"" << tile_size_mm << "\" fill=\"#ff7700\" fill-opacity=\""
               << opacity << "\"/>\n";
        }
    }
    auto path = [&](const Polyline& p, const char* color) {
        if (p.points.empty())
            return;
        os << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << toMm(plan.line_width)
           << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\" d=\"M";
        for (const Point2& pt : p.points)
            os << ' ' << toMm(pt.x) << ' ' << -toMm(pt.y);
        if (p.closed)
            os << " Z";
        os << "\"/>\n";
    };
    // outer wall in red, the connected toolpath in black
    if (!plan.outer_wall.points.empty())
        path(plan.outer_wall, "#cc0000");
    path(plan.toolpath, "#000000");
    os << "</svg>\n";
}

} // namespace crossfoam
