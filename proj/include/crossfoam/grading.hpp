#pragma once

#include <map>

#include "density.hpp"
#include "forest.hpp"
#include "polygon.hpp"

namespace crossfoam {

inline PrismRegion regionOf(const PrismCell& c)
{
    PrismRegion r;
    r.ax = toMm(c.straight_corner.x); r.ay = toMm(c.straight_corner.y);
    r.bx = toMm(c.right_corner.x);    r.by = toMm(c.right_corner.y);
    r.cx = toMm(c.left_corner.x);     r.cy = toMm(c.left_corner.y);
    r.z0 = toMm(c.z0);                r.z1 = toMm(c.z1);
    return r;
}

inline double targetMassOf(const DensityField& field, const PrismCell& c)
{
    return targetMass(field, regionOf(c));
}

/*!
 * Lower bound pass: subdivide top-down while the mass after subdivision still
 * stays below the target mass, so the structure approaches the requested
 * density from below.
 */
inline void buildLowerBound(SubdivisionForest& forest, const DensityField& field)
{
    std::vector<cell_idx> stack(forest.roots.begin(), forest.roots.end());
    // keep root order: process index 0 first
    std::reverse(stack.begin(), stack.end());
    while (!stack.empty())
    {
        cell_idx idx = stack.back();
        stack.pop_back();
        if (forest.cell(idx).isLeaf() && forest.cell(idx).depth < forest.max_depth)
        {
            double m_n = forest.massAfterSubdivision(forest.cell(idx));
            double m_t = targetMassOf(field, forest.cell(idx));
            if (m_n < m_t)
                forest.subdivide(idx);
        }
        const PrismCell& c = forest.cell(idx);
        for (int k = 3; k >= 0; k--)
            if (c.children[k] != kNoCell)
                stack.push_back(c.children[k]);
    }
}

/*!
 * Error diffusion weights by position relative to the processed cell, on the
 * unfolded surface: up-left, up, up-right, right, down-right.  A neighbor
 * covering several positions collects their sum; smaller neighbors sharing a
 * direct position split its weight equally; diagonal positions keep their
 * weight unsplit.
 */
struct DiffusionWeights
{
    double up_left = 1.0;
    double up = 2.0;
    double up_right = 1.0;
    double right = 2.0;
    double down_right = 0.0;
};

struct GradingReport
{
    std::map<int, size_t> leaves_per_depth;
    double total_target_mass = 0.0;    // mm^3 over final leaves
    double total_realized_mass = 0.0;  // simplified mass over final leaves
    double dropped_error = 0.0;        // error diffused out of cells with no unprocessed neighbors
    size_t subdivisions = 0;           // performed by dithering
};

namespace detail {

/// order two linked cells of one vertical side along the traversal direction
inline void orderAlongTraversal(const SubdivisionForest& f, std::vector<cell_idx>& cells_on_side)
{
    if (cells_on_side.size() == 2)
    {
        const PrismCell& a = f.cell(cells_on_side[0]);
        for (cell_idx r : a.links[kSideRight])
            if (r == cells_on_side[1])
                return; // already left-to-right
        std::swap(cells_on_side[0], cells_on_side[1]);
    }
}

inline std::vector<cell_idx> orderedUps(const SubdivisionForest& f, const PrismCell& c)
{
    std::vector<cell_idx> ups = c.links[kSideUp];
    orderAlongTraversal(f, ups);
    return ups;
}
inline std::vector<cell_idx> orderedByZ(std::vector<cell_idx> v, const SubdivisionForest& f)
{
    std::sort(v.begin(), v.end(), [&](cell_idx a, cell_idx b) { return f.cell(a).z0 < f.cell(b).z0; });
    return v;
}

inline std::map<cell_idx, double> diffusionWeightMap(const SubdivisionForest& f, cell_idx idx,
                                                     const DiffusionWeights& w)
{
    const PrismCell& c = f.cell(idx);
    std::map<cell_idx, double> weights;
    auto add = [&](cell_idx n, double v) {
        if (n != idx && v != 0.0)
            weights[n] += v;
    };
    std::vector<cell_idx> ups = orderedUps(f, c);
    std::vector<cell_idx> downs = c.links[kSideDown];
    orderAlongTraversal(f, downs);
    std::vector<cell_idx> rights = orderedByZ(c.links[kSideRight], f);
    std::vector<cell_idx> lefts = orderedByZ(c.links[kSideLeft], f);

    for (cell_idx u : ups)
        add(u, w.up / ups.size());
    for (cell_idx r : rights)
        add(r, w.right / rights.size());

    // diagonals through links of links, deduplicated; they retain the full weight
    auto addDiagonal = [&](const std::vector<cell_idx>& candidates, double v) {
        std::vector<cell_idx> seen;
        for (cell_idx d : candidates)
        {
            if (d == idx || std::find(seen.begin(), seen.end(), d) != seen.end())
                continue;
            seen.push_back(d);
            add(d, v);
        }
    };
    std::vector<cell_idx> up_right, up_left, down_right;
    if (!ups.empty())
        for (cell_idx d : f.cell(ups.back()).links[kSideRight])
            up_right.push_back(d);
    if (!rights.empty())
        for (cell_idx d : f.cell(rights.back()).links[kSideUp])
            up_right.push_back(d);
    if (!ups.empty())
        for (cell_idx d : f.cell(ups.front()).links[kSideLeft])
            up_left.push_back(d);
    if (!lefts.empty())
        for (cell_idx d : f.cell(orderedByZ(lefts, f).back()).links[kSideUp])
            up_left.push_back(d);
    if (!downs.empty())
        for (cell_idx d : f.cell(downs.back()).links[kSideRight])
            down_right.push_back(d);
    if (!rights.empty())
        for (cell_idx d : f.cell(rights.front()).links[kSideDown])
            down_right.push_back(d);
    // direct neighbors never occupy their own diagonal slot
    auto scrub = [&](std::vector<cell_idx>& v, const std::vector<cell_idx>& direct) {
        v.erase(std::remove_if(v.begin(), v.end(), [&](cell_idx d) {
                    return std::find(direct.begin(), direct.end(), d) != direct.end()
                        && f.cell(d).depth >= c.depth;
                }),
                v.end());
    };
    scrub(up_right, ups); scrub(up_right, rights);
    scrub(up_left, ups); scrub(up_left, lefts);
    scrub(down_right, downs); scrub(down_right, rights);
    addDiagonal(up_right, w.up_right);
    addDiagonal(up_left, w.up_left);
    addDiagonal(down_right, w.down_right);
    return weights;
}

} // namespace detail

/*!
 * Dithering pass: visit leaves depth-first in Morton-like order (bottom-left,
 * bottom-right, then top-left, top-right), subdivide when the midpoint test
 * 1/2 (M_C + M_N) + M_E < M_T holds and the level constraint allows it, and
 * diffuse the residual quantization error to unprocessed linked neighbors.
 */
inline GradingReport dither(SubdivisionForest& forest, const DensityField& field,
                            const DiffusionWeights& weights = {})
{
    for (PrismCell& c : forest.cells)
    {
        c.error_mass = 0.0;
        c.processed = false;
    }
    GradingReport report;
    std::vector<cell_idx> stack(forest.roots.rbegin(), forest.roots.rend());
    while (!stack.empty())
    {
        cell_idx idx = stack.back();
        stack.pop_back();
        if (!forest.cell(idx).isLeaf())
        {
            const auto& ch = forest.cell(idx).children;
            for (int k = 3; k >= 0; k--)
                if (ch[k] != kNoCell)
                    stack.push_back(ch[k]);
            continue;
        }
        if (forest.cell(idx).processed)
            continue;
        double m_c = forest.currentMass(forest.cell(idx));
        double m_n = forest.massAfterSubdivision(forest.cell(idx));
        double m_t = targetMassOf(field, forest.cell(idx));
        double m_e = forest.cell(idx).error_mass;

        bool wants = 0.5 * (m_c + m_n) + m_e < m_t;
        bool constrained = false;
        for (int side = 0; side < 4 && !constrained; side++)
            for (cell_idx n : forest.cell(idx).links[side])
                if (forest.cell(n).depth < forest.cell(idx).depth)
                {
                    constrained = true;
                    break;
                }
        bool subdividing = wants && !constrained && forest.cell(idx).depth < forest.max_depth;

        // neighborhood weights before any rewiring
        std::map<cell_idx, double> wmap = detail::diffusionWeightMap(forest, idx, weights);

        double realized = m_c;
        if (subdividing)
        {
            std::vector<cell_idx> kids = forest.subdivide(idx);
            for (cell_idx k : kids)
                forest.cell(k).processed = true;
            realized = m_n;
            report.subdivisions++;
        }
        forest.cell(idx).processed = true;
        double residual = realized + m_e - m_t;

        double wsum = 0;
        for (auto& [n, v] : wmap)
            if (forest.cell(n).isLeaf() && !forest.cell(n).processed)
                wsum += v;
        if (wsum > 0)
        {
            for (auto& [n, v] : wmap)
                if (forest.cell(n).isLeaf() && !forest.cell(n).processed)
                    forest.cell(n).error_mass += residual * (v / wsum);
        }
        else
        {
            report.dropped_error += residual;
        }
    }
    // final accounting over leaves
    forest.forEachLeaf([&](cell_idx i) {
        const PrismCell& c = forest.cell(i);
        report.leaves_per_depth[c.depth]++;
        report.total_realized_mass += forest.currentMass(c);
        report.total_target_mass += targetMassOf(field, c);
    });
    return report;
}

/*! One skin region: the outline at a given height that needs support below. */
struct SkinArea
{
    coord_t z = 0;
    Polygons outline;
};

inline bool triangleOverlapsPolygons(Point2 a, Point2 b, Point2 c, const Polygons& polys)
{
    Polygons tri;
    Polygon t;
    t.points = {a, b, c};
    tri.add(t);
    for (const Point2& p : t.points)
        if (pointInside(polys, p))
            return true;
    for (const Polygon& poly : polys.polys)
        for (const Point2& p : poly.points)
            if (pointInside(tri, p))
                return true;
    for (const Polygon& poly : polys.polys)
    {
        size_t m = poly.size();
        for (size_t j = 0; j < m; j++)
        {
            Point2 u = poly[j], v = poly[(j + 1) % m];
            for (int e = 0; e < 3; e++)
            {
                Point2 s = t.points[e], w = t.points[(e + 1) % 3];
                if (segmentSegmentDistance(s, w, u, v) == 0.0)
                    return true;
            }
        }
    }
    return false;
}

/*!
 * After dithering, guarantee a minimum subdivision level beneath dense skin
 * regions by iteratively subdividing overlapping leaves.
 */
inline size_t enforceSkinSupport(SubdivisionForest& forest, const std::vector<SkinArea>& skins, int min_level)
{
    size_t subdivided = 0;
    bool changed = true;
    while (changed)
    {
        changed = false;
        for (cell_idx i = 0; i < static_cast<cell_idx>(forest.cells.size()); i++)
        {
            const PrismCell& c = forest.cell(i);
            if (!c.isLeaf() || c.depth >= min_level || c.depth >= forest.max_depth)
                continue;
            bool overlaps = false;
            for (const SkinArea& skin : skins)
            {
                if (skin.z < c.z0 || skin.z >= c.z1)
                    continue;
                if (triangleOverlapsPolygons(c.straight_corner, c.right_corner, c.left_corner, skin.outline))
                {
                    overlaps = true;
                    break;
                }
            }
            if (overlaps)
            {
                forest.subdivide(i);
                subdivided++;
                changed = true;
            }
        }
    }
    return subdivided;
}

} // namespace crossfoam
