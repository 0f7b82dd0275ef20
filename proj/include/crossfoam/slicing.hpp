#pragma once

#include <set>

#include "surface.hpp"

namespace crossfoam {

/*! The sliced space-filling polygon of one layer. */
struct LayerCurve
{
    coord_t z = 0;
    std::vector<Point2> points;      // closed loop, one vertex per crossed face
    std::vector<cell_idx> cells;     // cells[i] is the cell left of points[i] -> points[i+1]... the cell whose exit produced points[i]
    std::vector<int> faces;          // face index that carries points[i]
    coord_t line_width = 0;

    size_t size() const { return points.size(); }
};

/// collect all band boundaries so callers can nudge z off the seams
inline std::set<coord_t> bandBoundaries(const SubdivisionForest& forest)
{
    std::set<coord_t> zs;
    forest.forEachLeaf([&](cell_idx i) {
        zs.insert(forest.cell(i).z0);
        zs.insert(forest.cell(i).z1);
    });
    return zs;
}

inline coord_t nudgeOffSeams(const std::set<coord_t>& seams, coord_t z)
{
    while (seams.count(z))
        z += 1;
    return z;
}

/*!
 * Extract the closed space-filling polygon at height z by walking right-links
 * from the leaf nearest to start_hint.  z must not coincide with a band
 * boundary (see nudgeOffSeams).
 */
inline LayerCurve traceLayer(const SubdivisionForest& forest, const SurfaceModel& surface, coord_t z,
                             Point2 start_hint)
{
    LayerCurve curve;
    curve.z = z;
    curve.line_width = forest.line_width;

    // starting cell: band leaf whose sliced exit vertex is nearest the hint
    cell_idx start = kNoCell;
    double best = 1e300;
    forest.forEachLeaf([&](cell_idx i) {
        const PrismCell& c = forest.cell(i);
        if (!(c.z0 < z && z < c.z1))
            return;
        Point2 v = surface.exitFaceOf(i).at(z);
        double d = vSize(v - start_hint);
        if (d < best)
        {
            best = d;
            start = i;
        }
    });
    if (start == kNoCell)
        throw std::runtime_error("traceLayer: no cell spans the requested height");

    size_t leaf_guard = forest.cells.size() + 1;
    cell_idx cur = start;
    while (true)
    {
        curve.points.push_back(surface.exitFaceOf(cur).at(z));
        curve.cells.push_back(cur);
        curve.faces.push_back(surface.incidence.at(cur).second);
        cell_idx next = kNoCell;
        for (cell_idx n : forest.cell(cur).links[kSideRight])
        {
            const PrismCell& nc = forest.cell(n);
            if (nc.z0 < z && z < nc.z1)
            {
                if (next != kNoCell)
                    throw std::runtime_error("traceLayer: ambiguous right neighbor at z");
                next = n;
            }
        }
        if (next == kNoCell)
            throw std::runtime_error("traceLayer: traversal not closed (no right neighbor at z)");
        cur = next;
        if (cur == start)
            break;
        if (curve.points.size() > leaf_guard)
            throw std::runtime_error("traceLayer: traversal not closed (loop exceeds leaf count)");
    }
    return curve;
}

/*!
 * Pull every vertex to at least half a line width away from the prism corners
 * of its face, so paths in neighboring prisms cannot overlap.  Distances are
 * measured along the face; a 45 degree corner needs sqrt(2)/2 of a width.
 */
inline LayerCurve clampEndpoints(const LayerCurve& in, const SurfaceModel& surface)
{
    LayerCurve out = in;
    for (size_t i = 0; i < out.points.size(); i++)
    {
        const Face& f = surface.faces[out.faces[i]];
        Point2 dir = f.seg_b - f.seg_a;
        double len = vSize(dir);
        if (len <= 0)
            continue;
        double pos = dot(dir, out.points[i] - f.seg_a) / len;
        double lo = static_cast<double>(f.clamp_a);
        double hi = len - static_cast<double>(f.clamp_b);
        double clamped = std::clamp(pos, lo, hi);
        if (lo > hi)
            clamped = len / 2; // face shorter than a line width
        if (clamped != pos)
        {
            out.points[i] = {f.seg_a.x + static_cast<coord_t>(std::llround(dir.x * clamped / len)),
                             f.seg_a.y + static_cast<coord_t>(std::llround(dir.y * clamped / len))};
        }
    }
    return out;
}

namespace detail {

/// does the segment leave the face at less than 45 degrees to it
inline bool overlapsFace(const Point2& face_dir, const Point2& seg)
{
    double lhs = std::abs(static_cast<double>(dot(face_dir, seg)));
    return lhs > vSize(face_dir) * vSize(seg) * 0.5 * std::numbers::sqrt2;
}

} // namespace detail

/*!
 * Where the curve turns sharper than 45 degrees against the prism side it
 * crosses, insert one extra vertex at distance w*sqrt(2)/2 from the corner
 * vertex so the two passes keep a full line width apart.
 */
inline LayerCurve detourSharpTurns(const LayerCurve& in, const SurfaceModel& surface)
{
    const coord_t w = in.line_width;
    LayerCurve out;
    out.z = in.z;
    out.line_width = w;
    const size_t n = in.points.size();
    auto emit = [&](Point2 p, cell_idx c, int f) {
        out.points.push_back(p);
        out.cells.push_back(c);
        out.faces.push_back(f);
    };
    for (size_t i = 0; i < n; i++)
    {
        Point2 prev = in.points[(i + n - 1) % n];
        Point2 v = in.points[i];
        Point2 next = in.points[(i + 1) % n];
        const Face& f = surface.faces[in.faces[i]];
        Point2 face_dir = f.seg_b - f.seg_a;
        auto bend = [&](const Point2& other) -> Point2 {
            // half a width into the cell of `other`, half a width along the face
            Point2 perp = normal(turn90CCW(face_dir), w / 2);
            if (dot(perp, other - v) < 0)
                perp = -perp;
            Point2 along = normal(face_dir, w / 2);
            if (dot(along, other - v) < 0)
                along = -along;
            return v + perp + along;
        };
        // incoming segment against this face
        bool sharp_in = vSize2(v - prev) > w * w * 3 / 4 && detail::overlapsFace(face_dir, v - prev);
        bool sharp_out = vSize2(next - v) > w * w * 3 / 4 && detail::overlapsFace(face_dir, next - v);
        if (sharp_in)
            emit(bend(prev), in.cells[i], in.faces[i]);
        emit(v, in.cells[i], in.faces[i]);
        if (sharp_out)
            emit(bend(next), in.cells[i], in.faces[i]);
    }
    return out;
}

/*! Convenience: trace, clamp and detour in one call. */
inline LayerCurve sliceForestLayer(const SubdivisionForest& forest, const SurfaceModel& surface, coord_t z,
                                   Point2 start_hint)
{
    LayerCurve c = traceLayer(forest, surface, z, start_hint);
    c = clampEndpoints(c, surface);
    c = detourSharpTurns(c, surface);
    return c;
}

} // namespace crossfoam
