#pragma once

#include <map>
#include <numeric>
#include <unordered_map>

#include "forest.hpp"

namespace crossfoam {

/*
 * The space-filling surface is never built explicitly.  What slicing needs is,
 * for every prism side crossed by the surface, the vertex path z -> point on
 * that side.  Each such side is a Face: the column shared by a horizontally
 * linked group of leaves.  The canonical path is the diagonal of the deepest
 * adjacent cells' patch edges; continuity enforcement then reconciles path
 * endpoints across band interfaces so the conceptual surface stays connected
 * and printable at level changes.
 */

struct PathPoint
{
    coord_t z;
    Point2 p;
};

struct Face
{
    Point2 seg_a;  // plan segment endpoints (pivot end of the deepest cells first)
    Point2 seg_b;
    coord_t z0 = 0, z1 = 0;
    int depth = 0;              // deepest adjacent cell depth; owns the path
    coord_t clamp_a = 0;        // clamping distance for vertices near seg_a
    coord_t clamp_b = 0;
    std::vector<PathPoint> path; // z-increasing breakpoints
    bool ruled = false;          // built from finer cells than one of its sides
    bool flipped = false;        // adjusted by continuity enforcement

    Point2 at(coord_t z) const
    {
        if (z <= path.front().z)
            return path.front().p;
        for (size_t i = 0; i + 1 < path.size(); i++)
        {
            const PathPoint& a = path[i];
            const PathPoint& b = path[i + 1];
            if (z <= b.z)
            {
                if (b.z == a.z)
                    return a.p;
                return lerpRound(a.p, b.p, z - a.z, b.z - a.z);
            }
        }
        return path.back().p;
    }
};

struct EnforcementStats
{
    size_t flips = 0;     // vertical side continuity adjustments
    size_t landings = 0;  // vertical mid continuity adjustments
    size_t fallbacks = 0; // endpoint moved without a reflection altitude
    std::vector<std::pair<Point3, double>> residuals; // unresolved discontinuities
};

class SurfaceModel
{
public:
    std::vector<Face> faces;
    // per leaf: entry and exit face index
    std::unordered_map<cell_idx, std::pair<int, int>> incidence;
    std::vector<std::vector<cell_idx>> face_cells; // all leaves incident to each face
    EnforcementStats stats;

    const Face& entryFaceOf(cell_idx c) const { return faces[incidence.at(c).first]; }
    const Face& exitFaceOf(cell_idx c) const { return faces[incidence.at(c).second]; }

    /// patch edges of one leaf: the portions of its two face paths in its z range
    std::pair<std::vector<PathPoint>, std::vector<PathPoint>> patchEdges(const SubdivisionForest& f, cell_idx c) const
    {
        auto clipPath = [&](const Face& face) {
            const PrismCell& cell = f.cell(c);
            std::vector<PathPoint> out;
            out.push_back({cell.z0, face.at(cell.z0)});
            for (const PathPoint& pp : face.path)
                if (pp.z > cell.z0 && pp.z < cell.z1)
                    out.push_back(pp);
            out.push_back({cell.z1, face.at(cell.z1)});
            return out;
        };
        return {clipPath(entryFaceOf(c)), clipPath(exitFaceOf(c))};
    }
};

namespace detail {

inline std::vector<PathPoint> canonicalEdge(const PrismCell& c, bool entry)
{
    auto [piv, far] = entry ? c.entryFace() : c.exitFace();
    if (c.apexTop())
        return {{c.z0, far}, {c.z1, piv}};
    return {{c.z0, piv}, {c.z1, far}};
}

struct PlaneKey
{
    int64_t a, b, c;
    bool operator==(const PlaneKey&) const = default;
    bool operator<(const PlaneKey& o) const
    {
        return std::tie(a, b, c) < std::tie(o.a, o.b, o.c);
    }
};

inline PlaneKey planeOf(Point2 p, Point2 q)
{
    __int128 a = q.y - p.y;
    __int128 b = p.x - q.x;
    __int128 c = static_cast<__int128>(q.x) * p.y - static_cast<__int128>(p.x) * q.y;
    __int128 g = 0;
    for (__int128 v : {a < 0 ? -a : a, b < 0 ? -b : b, c < 0 ? -c : c})
        g = std::gcd(static_cast<int64_t>(g), static_cast<int64_t>(v));
    if (g == 0)
        g = 1;
    a /= g; b /= g; c /= g;
    if (a < 0 || (a == 0 && b < 0))
    {
        a = -a; b = -b; c = -c;
    }
    return {static_cast<int64_t>(a), static_cast<int64_t>(b), static_cast<int64_t>(c)};
}

inline bool segmentsOverlapOnPlane(Point2 a1, Point2 b1, Point2 a2, Point2 b2)
{
    Point2 d = b1 - a1;
    coord_t t0 = dot(d, a2 - a1);
    coord_t t1 = dot(d, b2 - a1);
    if (t0 > t1)
        std::swap(t0, t1);
    return std::min(t1, vSize2(d)) > std::max(t0, static_cast<coord_t>(0));
}

} // namespace detail

/*!
 * Build the per-face vertex paths for the current leaves and enforce
 * continuity across subdivision level differences:
 *  1. horizontal: a coarse cell's edge is replaced by the finer neighbors'
 *     path, turning its patch into a ruled surface (done during face build),
 *  2. vertical side: where paths on one vertical plane disagree at a band
 *     interface, part of the coarser path is flipped horizontally so the
 *     endpoints meet,
 *  3. vertical mid: a path column with no continuation lands on the
 *     horizontal patch boundary of the coarser cell beyond the interface.
 * The pass is deterministic and idempotent; re-running it performs no work.
 */
inline SurfaceModel buildSurface(const SubdivisionForest& forest, double tolerance_units = 2.0)
{
    SurfaceModel model;
    const coord_t w = forest.line_width;
    const coord_t clamp_straight = w / 2;
    const coord_t clamp_diag = static_cast<coord_t>(std::llround(w * 0.5 * std::numbers::sqrt2));

    // ---- step 1: faces with canonical paths from the deeper side
    std::vector<cell_idx> leaves;
    forest.forEachLeaf([&](cell_idx i) { leaves.push_back(i); });
    for (cell_idx c : leaves)
    {
        if (model.incidence.count(c) && model.incidence[c].second >= 0)
            continue;
        const std::vector<cell_idx>& rights = forest.cell(c).links[kSideRight];
        std::vector<cell_idx> fine_cells, coarse_cells;
        bool fine_exits; // fine side exits into this face (else it enters)
        if (rights.size() == 1 && forest.cell(rights[0]).depth < forest.cell(c).depth)
        {
            coarse_cells = {rights[0]};
            fine_cells = forest.cell(rights[0]).links[kSideLeft];
            fine_exits = true;
        }
        else
        {
            coarse_cells = {c};
            fine_cells = rights;
            fine_exits = false;
        }
        std::sort(fine_cells.begin(), fine_cells.end(),
                  [&](cell_idx a, cell_idx b) { return forest.cell(a).z0 < forest.cell(b).z0; });
        Face face;
        const PrismCell& rep = forest.cell(fine_cells.front());
        auto seg = fine_exits ? rep.exitFace() : rep.entryFace();
        face.seg_a = seg.first;
        face.seg_b = seg.second;
        face.z0 = forest.cell(fine_cells.front()).z0;
        face.z1 = forest.cell(fine_cells.back()).z1;
        face.depth = 0;
        for (cell_idx fc : fine_cells)
        {
            face.depth = std::max(face.depth, static_cast<int>(forest.cell(fc).depth));
            std::vector<PathPoint> edge = detail::canonicalEdge(forest.cell(fc), !fine_exits);
            for (const PathPoint& pp : edge)
            {
                if (!face.path.empty() && face.path.back().z == pp.z)
                    continue; // stacked canonical edges join exactly
                face.path.push_back(pp);
            }
        }
        face.ruled = forest.cell(coarse_cells[0]).depth < face.depth || fine_cells.size() > 1;
        // clamping distances: strictest requirement of the adjacent cells at each end
        auto clampFor = [&](const Point2& end) {
            coord_t c_req = clamp_straight;
            auto consider = [&](cell_idx ci) {
                const PrismCell& pc = forest.cell(ci);
                if ((end == pc.right_corner || end == pc.left_corner)
                    && !(end == pc.straight_corner))
                    c_req = std::max(c_req, clamp_diag);
            };
            for (cell_idx ci : fine_cells) consider(ci);
            for (cell_idx ci : coarse_cells) consider(ci);
            return c_req;
        };
        face.clamp_a = clampFor(face.seg_a);
        face.clamp_b = clampFor(face.seg_b);

        int fid = static_cast<int>(model.faces.size());
        model.faces.push_back(std::move(face));
        model.face_cells.emplace_back();
        for (cell_idx fc : fine_cells)
        {
            auto& inc = model.incidence[fc];
            (fine_exits ? inc.second : inc.first) = fid;
            model.face_cells[fid].push_back(fc);
        }
        for (cell_idx cc : coarse_cells)
        {
            auto& inc = model.incidence[cc];
            (fine_exits ? inc.first : inc.second) = fid;
            if (std::find(model.face_cells[fid].begin(), model.face_cells[fid].end(), cc) == model.face_cells[fid].end())
                model.face_cells[fid].push_back(cc);
        }
    }
    // make sure incidences got default-initialized properly
    for (cell_idx c : leaves)
    {
        auto it = model.incidence.find(c);
        if (it == model.incidence.end())
            throw std::logic_error("leaf without faces");
    }

    // ---- steps 2 and 3: reconcile endpoints across band interfaces
    // cells adjacent to each face whose band ends at the face's z extremes
    auto adjacentAtEnd = [&](int fid, bool top) {
        std::vector<cell_idx> out;
        const Face& f = model.faces[fid];
        for (cell_idx c : model.face_cells[fid])
        {
            if (top && forest.cell(c).z1 == f.z1)
                out.push_back(c);
            if (!top && forest.cell(c).z0 == f.z0)
                out.push_back(c);
        }
        return out;
    };

    auto pathParam = [](const Face& f, Point2 p) -> coord_t {
        return dot(f.seg_b - f.seg_a, p - f.seg_a);
    };

    auto flipEnd = [&](Face& f, bool at_top, Point2 target) -> bool {
        Point2 endpt = at_top ? f.path.back().p : f.path.front().p;
        if (endpt == target)
            return false;
        Point2 m = midpoint(endpt, target);
        coord_t um = pathParam(f, m);
        auto reflect = [&](Point2 p) { return m * 2 - p; };
        if (at_top)
        {
            for (size_t k = f.path.size() - 1; k > 0; k--)
            {
                coord_t ua = pathParam(f, f.path[k - 1].p);
                coord_t ub = pathParam(f, f.path[k].p);
                if (ua == ub || (ua - um > 0) == (ub - um > 0))
                    continue;
                coord_t zs = lerpRound(f.path[k - 1].z, f.path[k].z, um - ua, ub - ua);
                std::vector<PathPoint> kept(f.path.begin(), f.path.begin() + k);
                kept.push_back({zs, m});
                for (size_t j = k - 1; j < f.path.size(); j++)
                    if (f.path[j].z > zs)
                        kept.push_back({f.path[j].z, reflect(f.path[j].p)});
                f.path = std::move(kept);
                f.flipped = true;
                return true;
            }
        }
        else
        {
            for (size_t k = 0; k + 1 < f.path.size(); k++)
            {
                coord_t ua = pathParam(f, f.path[k].p);
                coord_t ub = pathParam(f, f.path[k + 1].p);
                if (ua == ub || (ua - um > 0) == (ub - um > 0))
                    continue;
                coord_t zs = lerpRound(f.path[k].z, f.path[k + 1].z, um - ua, ub - ua);
                std::vector<PathPoint> kept;
                for (size_t j = 0; j <= k; j++)
                    if (f.path[j].z < zs)
                        kept.push_back({f.path[j].z, reflect(f.path[j].p)});
                kept.push_back({zs, m});
                kept.insert(kept.end(), f.path.begin() + k + 1, f.path.end());
                f.path = std::move(kept);
                f.flipped = true;
                return true;
            }
        }
        // no reflection altitude: move the endpoint directly
        model.stats.fallbacks++;
        if (at_top)
            f.path.back().p = target;
        else
            f.path.front().p = target;
        f.flipped = true;
        return true;
    };

    // continuation faces per (face, end): faces of vertically linked cells on the same plane
    auto continuations = [&](int fid, bool at_top, std::vector<cell_idx>& beyond) {
        const Face& f = model.faces[fid];
        detail::PlaneKey pk = detail::planeOf(f.seg_a, f.seg_b);
        coord_t zi = at_top ? f.z1 : f.z0;
        std::vector<int> conts;
        beyond.clear();
        for (cell_idx c : adjacentAtEnd(fid, at_top))
        {
            for (cell_idx v : forest.cell(c).links[at_top ? kSideUp : kSideDown])
            {
                if (std::find(beyond.begin(), beyond.end(), v) == beyond.end())
                    beyond.push_back(v);
            }
        }
        for (cell_idx v : beyond)
        {
            for (int gid : {model.incidence[v].first, model.incidence[v].second})
            {
                if (gid == fid)
                    continue;
                const Face& g = model.faces[gid];
                coord_t gz = at_top ? g.z0 : g.z1;
                if (gz != zi)
                    continue;
                if (!(detail::planeOf(g.seg_a, g.seg_b) == pk))
                    continue;
                if (!detail::segmentsOverlapOnPlane(f.seg_a, f.seg_b, g.seg_a, g.seg_b))
                    continue;
                if (std::find(conts.begin(), conts.end(), gid) == conts.end())
                    conts.push_back(gid);
            }
        }
        return conts;
    };

    // step 2: flips, processed deepest-first so targets are final
    std::vector<int> order(model.faces.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (model.faces[a].depth != model.faces[b].depth)
            return model.faces[a].depth > model.faces[b].depth;
        return a < b;
    });
    std::vector<cell_idx> beyond;
    for (int fid : order)
    {
        for (bool at_top : {true, false})
        {
            std::vector<int> conts = continuations(fid, at_top, beyond);
            if (conts.empty())
                continue;
            int deepest = *std::max_element(conts.begin(), conts.end(), [&](int a, int b) {
                return model.faces[a].depth < model.faces[b].depth;
            });
            if (model.faces[deepest].depth > model.faces[fid].depth)
            {
                const Face& g = model.faces[deepest];
                Point2 target = at_top ? g.path.front().p : g.path.back().p;
                if (flipEnd(model.faces[fid], at_top, target))
                    model.stats.flips++;
            }
        }
    }
    // step 3: landings, shallowest-first so the coarse boundary below is final
    std::reverse(order.begin(), order.end());
    for (int fid : order)
    {
        for (bool at_top : {true, false})
        {
            Face& f = model.faces[fid];
            coord_t zi = at_top ? f.z1 : f.z0;
            std::vector<int> conts = continuations(fid, at_top, beyond);
            if (!conts.empty() || beyond.empty())
                continue;
            // the sheet ends against the patch of the cell beyond the interface;
            // land on that patch's horizontal boundary crossed with this plane
            cell_idx yi = *std::max_element(beyond.begin(), beyond.end(), [&](cell_idx a, cell_idx b) {
                return forest.cell(a).depth < forest.cell(b).depth;
            });
            Point2 ein = model.faces[model.incidence[yi].first].at(zi);
            Point2 eout = model.faces[model.incidence[yi].second].at(zi);
            detail::PlaneKey pk = detail::planeOf(f.seg_a, f.seg_b);
            __int128 va = static_cast<__int128>(pk.a) * ein.x + static_cast<__int128>(pk.b) * ein.y + pk.c;
            __int128 vb = static_cast<__int128>(pk.a) * eout.x + static_cast<__int128>(pk.b) * eout.y + pk.c;
            Point2 target;
            if ((va <= 0 && vb >= 0) || (va >= 0 && vb <= 0))
            {
                if (va == vb)
                    continue;
                double t = static_cast<double>(-static_cast<double>(va)) / static_cast<double>(vb - va);
                target = {ein.x + static_cast<coord_t>(std::llround(t * (eout.x - ein.x))),
                          ein.y + static_cast<coord_t>(std::llround(t * (eout.y - ein.y)))};
            }
            else
            {
                // boundary does not cross this plane: land on the nearer face end
                Point2 near_pt = (va < 0 ? va : -va) > (vb < 0 ? vb : -vb) ? eout : ein;
                coord_t da = vSize2(near_pt - f.seg_a);
                coord_t db = vSize2(near_pt - f.seg_b);
                target = da <= db ? f.seg_a : f.seg_b;
            }
            Point2 endpt = at_top ? f.path.back().p : f.path.front().p;
            if (vSize(endpt - target) <= tolerance_units)
                continue;
            if (flipEnd(f, at_top, target))
                model.stats.landings++;
        }
    }
    // residual audit: every continuation pair must now meet
    for (size_t fid = 0; fid < model.faces.size(); fid++)
    {
        for (bool at_top : {true, false})
        {
            std::vector<int> conts = continuations(static_cast<int>(fid), at_top, beyond);
            const Face& f = model.faces[fid];
            Point2 endpt = at_top ? f.path.back().p : f.path.front().p;
            for (int gid : conts)
            {
                const Face& g = model.faces[gid];
                if (g.depth < f.depth)
                    continue; // the shallower side was adjusted toward us
                Point2 gpt = at_top ? g.path.front().p : g.path.back().p;
                double d = vSize(endpt - gpt);
                if (d > tolerance_units && g.depth > f.depth)
                    model.stats.residuals.push_back({{endpt.x, endpt.y, at_top ? f.z1 : f.z0}, d});
            }
        }
    }
    return model;
}

/*! Debug aid: the ruled patches as an OBJ triangle soup. */
inline void writeSurfaceObj(std::ostream& os, const SubdivisionForest& forest, const SurfaceModel& model)
{
    size_t vbase = 1;
    std::vector<cell_idx> leaves;
    forest.forEachLeaf([&](cell_idx i) { leaves.push_back(i); });
    for (cell_idx c : leaves)
    {
        auto [entry, exit] = model.patchEdges(forest, c);
        std::vector<coord_t> zs;
        for (const PathPoint& pp : entry) zs.push_back(pp.z);
        for (const PathPoint& pp : exit) zs.push_back(pp.z);
        std::sort(zs.begin(), zs.end());
        zs.erase(std::unique(zs.begin(), zs.end()), zs.end());
        const Face& fin = model.entryFaceOf(c);
        const Face& fout = model.exitFaceOf(c);
        for (size_t i = 0; i + 1 < zs.size(); i++)
        {
            Point2 a0 = fin.at(zs[i]), b0 = fout.at(zs[i]);
            Point2 a1 = fin.at(zs[i + 1]), b1 = fout.at(zs[i + 1]);
            double zlo = toMm(zs[i]), zhi = toMm(zs[i + 1]);
            os << "v " << toMm(a0.x) << ' ' << toMm(a0.y) << ' ' << zlo << '\n';
            os << "v " << toMm(b0.x) << ' ' << toMm(b0.y) << ' ' << zlo << '\n';
            os << "v " << toMm(b1.x) << ' ' << toMm(b1.y) << ' ' << zhi << '\n';
            os << "v " << toMm(a1.x) << ' ' << toMm(a1.y) << ' ' << zhi << '\n';
            os << "f " << vbase << ' ' << vbase + 1 << ' ' << vbase + 2 << '\n';
            os << "f " << vbase << ' ' << vbase + 2 << ' ' << vbase + 3 << '\n';
            vbase += 4;
        }
    }
}

} // namespace crossfoam
