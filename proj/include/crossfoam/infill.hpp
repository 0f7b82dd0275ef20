#pragma once

#include "polygon.hpp"
#include "slicing.hpp"

namespace crossfoam {

/*!
 * A bridge joins two toolpath loops: segments p->p2 and q->q2 are added and
 * the short arcs p..q / p2..q2 are removed, keeping the path continuous.
 */
struct Bridge
{
    Point2 p, q;   // on the source loop, |p-q| ~ w
    Point2 p2, q2; // on the other loop, q-q2 parallel to p-p2
    double length = 0; // |p-p2|
    double removed_arc_len = 0; // total arc length removed from both loops
};

enum class BridgeCriteria
{
    LowCurvature,  // prefer attachment at flat spots
    MostInterior,  // prefer attachment away from the area boundary
};

/*! Everything the printer needs for one layer. */
struct LayerPlan
{
    coord_t z = 0;
    coord_t line_width = 0;
    Polygons walls;                      // perimeters, outermost first
    std::vector<Polyline> infill_loops;  // fitted loops before connection
    std::vector<Bridge> bridges;
    Polyline toolpath;                   // the single final extrusion path (closed)
    Polyline outer_wall;                 // separate leading loop when configured
    double input_length = 0;             // total loop length before bridging
};

// ---------------------------------------------------------------------------
// fitting the curve into the infill area

namespace detail {

struct BoundaryEvent
{
    size_t piece;   // index into pieces
    bool is_start;  // piece start (curve enters) vs end (curve exits)
    size_t edge;    // area loop edge
    coord_t uNum, uDen;

    double sortKey() const { return static_cast<double>(edge) + static_cast<double>(uNum) / uDen; }
};

/// boundary arc from event a to event b walking the loop forward
inline std::vector<Point2> boundaryArc(const Polygon& loop, const BoundaryEvent& a, const BoundaryEvent& b,
                                       Point2 pa, Point2 pb)
{
    std::vector<Point2> pts;
    pts.push_back(pa);
    size_t m = loop.size();
    size_t e = a.edge;
    while (true)
    {
        if (e == b.edge)
        {
            bool before = (e != a.edge)
                || static_cast<__int128>(a.uNum) * b.uDen <= static_cast<__int128>(b.uNum) * a.uDen;
            if (before)
                break;
        }
        e = (e + 1) % m;
        if (!(pts.back() == loop[e]))
            pts.push_back(loop[e]);
        if (e == b.edge)
            break;
    }
    if (!(pts.back() == pb))
        pts.push_back(pb);
    return pts;
}

} // namespace detail

/*!
 * Trim the layer curve to the infill area and close the pieces along the area
 * boundary, so every piece is connected to itself via the perimeter.  Area
 * loops never touched by the curve come back as their own loops.
 */
inline std::vector<Polyline> fitToArea(const LayerCurve& curve, const Polygons& area)
{
    std::vector<Polyline> out;
    detail::ClipResult clip = detail::clipClosedCurve(curve.points, area);
    std::vector<bool> loop_touched(area.size(), false);
    if (clip.wholeCurveInside)
    {
        Polyline p;
        p.points = curve.points;
        p.closed = true;
        out.push_back(std::move(p));
    }
    else if (!clip.pieces.empty())
    {
        // events per area loop, sorted along the boundary
        std::vector<std::vector<detail::BoundaryEvent>> events(area.size());
        for (size_t i = 0; i < clip.pieces.size(); i++)
        {
            const detail::ClippedPiece& piece = clip.pieces[i];
            events[piece.start.areaLoop].push_back(
                {i, true, piece.start.areaEdge, piece.start.uNum, piece.start.uDen});
            events[piece.end.areaLoop].push_back(
                {i, false, piece.end.areaEdge, piece.end.uNum, piece.end.uDen});
            loop_touched[piece.start.areaLoop] = loop_touched[piece.end.areaLoop] = true;
        }
        // pair cyclically adjacent events; phase chosen to favor exit->entry arcs
        struct Partner { size_t loop, a, b; };
        std::vector<std::vector<int>> partner_of(area.size()); // event index -> partner event index
        std::vector<std::vector<detail::BoundaryEvent>*> evs;
        for (size_t li = 0; li < area.size(); li++)
        {
            auto& ev = events[li];
            std::sort(ev.begin(), ev.end(), [](const detail::BoundaryEvent& a, const detail::BoundaryEvent& b) {
                if (a.edge != b.edge)
                    return a.edge < b.edge;
                return static_cast<__int128>(a.uNum) * b.uDen < static_cast<__int128>(b.uNum) * a.uDen;
            });
            size_t k = ev.size();
            partner_of[li].assign(k, -1);
            if (k == 0)
                continue;
            if (k % 2 != 0)
                throw std::runtime_error("fitToArea: odd number of boundary crossings on a loop");
            auto phaseScore = [&](size_t phase) {
                int score = 0;
                for (size_t i = phase; i < k + phase; i += 2)
                {
                    const auto& a = ev[i % k];
                    const auto& b = ev[(i + 1) % k];
                    if (!a.is_start && b.is_start)
                        score++; // exit connected forward to an entry
                }
                return score;
            };
            size_t phase = phaseScore(0) >= phaseScore(1) ? 0 : 1;
            for (size_t i = phase; i < k + phase; i += 2)
            {
                partner_of[li][i % k] = static_cast<int>((i + 1) % k);
                partner_of[li][(i + 1) % k] = static_cast<int>(i % k);
            }
        }
        // walk: pieces alternate with boundary arcs
        std::vector<bool> piece_used(clip.pieces.size(), false);
        auto findEvent = [&](size_t piece, bool is_start) -> std::pair<size_t, size_t> {
            const detail::Crossing& cr = is_start ? clip.pieces[piece].start : clip.pieces[piece].end;
            const auto& ev = events[cr.areaLoop];
            for (size_t i = 0; i < ev.size(); i++)
                if (ev[i].piece == piece && ev[i].is_start == is_start)
                    return {cr.areaLoop, i};
            throw std::logic_error("fitToArea: event lookup failed");
        };
        for (size_t p0 = 0; p0 < clip.pieces.size(); p0++)
        {
            if (piece_used[p0])
                continue;
            Polyline loop;
            loop.closed = true;
            size_t piece = p0;
            bool forward = true;
            while (!piece_used[piece])
            {
                piece_used[piece] = true;
                const auto& pts = clip.pieces[piece].pts;
                if (forward)
                    loop.points.insert(loop.points.end(), pts.begin(), pts.end());
                else
                    loop.points.insert(loop.points.end(), pts.rbegin(), pts.rend());
                // continue along the boundary from the event we arrived at
                auto [li, ei] = findEvent(piece, !forward ? true : false);
                // arrived at: piece end if forward, piece start if reversed
                auto [lj, ej] = std::pair<size_t, size_t>{li, static_cast<size_t>(partner_of[li][ei])};
                const detail::BoundaryEvent& a = events[li][ei];
                const detail::BoundaryEvent& b = events[lj][ej];
                // arc walks forward from the earlier event
                Point2 pa = loop.points.back();
                const detail::ClippedPiece& nextp = clip.pieces[b.piece];
                Point2 pb = b.is_start ? nextp.pts.front() : nextp.pts.back();
                bool a_first = detail::BoundaryEvent{a}.sortKey() <= detail::BoundaryEvent{b}.sortKey();
                std::vector<Point2> arc;
                if (a_first)
                    arc = detail::boundaryArc(area[li], a, b, pa, pb);
                else
                {
                    arc = detail::boundaryArc(area[li], b, a, pb, pa);
                    std::reverse(arc.begin(), arc.end());
                }
                loop.points.insert(loop.points.end(), arc.begin() + 1, arc.end());
                piece = b.piece;
                forward = b.is_start;
                if (piece == p0 && ((forward && !loop.points.empty() && loop.points.back() == clip.pieces[p0].pts.front())
                                    || piece_used[piece]))
                    break;
            }
            // close: drop duplicated closing vertex
            if (loop.points.size() >= 2 && loop.points.front() == loop.points.back())
                loop.points.pop_back();
            if (loop.points.size() >= 3)
                out.push_back(std::move(loop));
        }
    }
    // untouched area loops become their own loops
    for (size_t li = 0; li < area.size(); li++)
    {
        if (loop_touched[li])
            continue;
        if (!clip.wholeCurveInside || !pointInside(Polygons{{area[li]}}, curve.points.empty() ? Point2{} : curve.points[0]))
        {
            Polyline p;
            p.points = area[li].points;
            p.closed = true;
            out.push_back(std::move(p));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// connecting loops with bridges

namespace detail {

struct ArcWalker
{
    const std::vector<Point2>& pts;
    explicit ArcWalker(const std::vector<Point2>& pts) : pts(pts) {}

    /// point at straight-line distance `dist` from pts[i], walking forward
    std::pair<Point2, size_t> pointAhead(size_t i, double dist) const
    {
        size_t n = pts.size();
        Point2 origin = pts[i];
        size_t j = i;
        for (size_t step = 0; step < n; step++)
        {
            size_t jn = (j + 1) % n;
            if (vSize(pts[jn] - origin) >= dist)
            {
                // binary search on the segment j..jn for |x - origin| = dist
                Point2 a = pts[j], b = pts[jn];
                double lo = 0, hi = 1;
                for (int it = 0; it < 40; it++)
                {
                    double mid = (lo + hi) / 2;
                    Point2 m{a.x + static_cast<coord_t>(std::llround((b.x - a.x) * mid)),
                             a.y + static_cast<coord_t>(std::llround((b.y - a.y) * mid))};
                    if (vSize(m - origin) < dist)
                        lo = mid;
                    else
                        hi = mid;
                }
                Point2 m{a.x + static_cast<coord_t>(std::llround((b.x - a.x) * hi)),
                         a.y + static_cast<coord_t>(std::llround((b.y - a.y) * hi))};
                return {m, j};
            }
            j = jn;
        }
        return {origin, i};
    }

    double arcLength(size_t seg_a, Point2 pa, size_t seg_b, Point2 pb) const
    {
        // forward from pa (on seg_a) to pb (on seg_b)
        size_t n = pts.size();
        if (seg_a == seg_b)
        {
            double da = vSize(pa - pts[seg_a]);
            double db = vSize(pb - pts[seg_a]);
            if (db >= da)
                return db - da;
        }
        double len = vSize(pts[(seg_a + 1) % n] - pa);
        size_t j = (seg_a + 1) % n;
        for (size_t step = 0; step < n; step++)
        {
            if (j == seg_b)
                return len + vSize(pb - pts[j]);
            len += vSize(pts[(j + 1) % n] - pts[j]);
            j = (j + 1) % n;
        }
        return len;
    }
};

/// first intersection of the ray origin+t*dir (t>=0) with a loop, if any
inline std::optional<std::pair<Point2, size_t>> rayHit(const std::vector<Point2>& pts, Point2 origin, Point2 dir)
{
    size_t n = pts.size();
    double best_t = 1e300;
    Point2 best_p;
    size_t best_seg = 0;
    for (size_t j = 0; j < n; j++)
    {
        Point2 a = pts[j], b = pts[(j + 1) % n];
        Point2 e = b - a;
        double denom = static_cast<double>(cross(dir, e));
        if (denom == 0)
            continue;
        double t = static_cast<double>(cross(a - origin, e)) / denom;
        double u = static_cast<double>(cross(a - origin, dir)) / denom;
        if (t > 1e-9 && u >= 0 && u <= 1 && t < best_t)
        {
            best_t = t;
            best_p = {origin.x + static_cast<coord_t>(std::llround(t * dir.x)),
                      origin.y + static_cast<coord_t>(std::llround(t * dir.y))};
            best_seg = j;
        }
    }
    if (best_t == 1e300)
        return std::nullopt;
    return std::make_pair(best_p, best_seg);
}

inline double turnAngleAt(const std::vector<Point2>& pts, size_t i)
{
    size_t n = pts.size();
    Point2 a = pts[(i + n - 1) % n], b = pts[i], c = pts[(i + 1) % n];
    double la = vSize(b - a), lc = vSize(c - b);
    if (la == 0 || lc == 0)
        return 0;
    double cosv = std::clamp(static_cast<double>(dot(b - a, c - b)) / (la * lc), -1.0, 1.0);
    return std::acos(cosv);
}

} // namespace detail

/*!
 * Join two loops with one bridge: walk p around the source until a candidate
 * pair within 3/2 w exists on some other loop, then pick the best attachment
 * per the criteria.  Returns false when no admissible bridge exists.
 */
inline bool buildBridge(std::vector<Polyline>& loops, size_t source, coord_t w, BridgeCriteria criteria,
                        const Polygons* interior_ref, std::vector<Bridge>* bridges_out)
{
    const double max_len = 1.5 * static_cast<double>(w);
    std::vector<Point2>& sp = loops[source].points;
    detail::ArcWalker source_walk(sp);

    struct Candidate
    {
        size_t other;
        Point2 p, q, p2, q2;
        size_t seg_p, seg_q, seg_p2, seg_q2;
        double len;
        double score;
    };
    std::optional<Candidate> best;
    for (size_t i = 0; i < sp.size(); i++)
    {
        Point2 p = sp[i];
        auto [q, seg_q] = source_walk.pointAhead(i, static_cast<double>(w));
        if (q == p)
            continue;
        for (size_t o = 0; o < loops.size(); o++)
        {
            if (o == source)
                continue;
            auto [p2, seg_p2] = closestOnPolygon(Polygon{loops[o].points}, p);
            double len = vSize(p2 - p);
            if (len > max_len || len == 0)
                continue;
            auto hit = detail::rayHit(loops[o].points, q, p2 - p);
            if (!hit)
                continue;
            auto [q2, seg_q2] = *hit;
            if (vSize(q2 - q) > 2.5 * max_len)
                continue;
            double score;
            if (criteria == BridgeCriteria::LowCurvature)
                score = -detail::turnAngleAt(sp, i);
            else
            {
                double d = 1e300;
                if (interior_ref)
                    for (const Polygon& poly : interior_ref->polys)
                        for (size_t s = 0; s < poly.size(); s++)
                            d = std::min(d, pointSegmentDistance(p, poly[s], poly[(s + 1) % poly.size()]));
                score = d == 1e300 ? 0 : d;
            }
            Candidate c{o, p, q, p2, q2, i, seg_q, seg_p2, seg_q2, len, score};
            if (!best || c.score > best->score + 1e-12)
                best = c;
        }
    }
    if (!best)
        return false;

    // splice: source arc q..(around)..p + bridge p->p2 + other arc, removing p2..q2 short side
    const Candidate& c = *best;
    std::vector<Point2>& op = loops[c.other].points;
    detail::ArcWalker other_walk(op);
    double fwd = other_walk.arcLength(c.seg_p2, c.p2, c.seg_q2, c.q2);
    double bwd = other_walk.arcLength(c.seg_q2, c.q2, c.seg_p2, c.p2);
    bool remove_forward = fwd <= bwd; // remove the short arc p2->q2

    auto collectArc = [](const std::vector<Point2>& pts, size_t seg_from, Point2 from, size_t seg_to, Point2 to) {
        // forward walk from..to, excluding nothing
        std::vector<Point2> arc;
        arc.push_back(from);
        size_t n = pts.size();
        size_t j = seg_from;
        if (seg_from == seg_to && vSize(to - pts[seg_from]) >= vSize(from - pts[seg_from]))
        {
            arc.push_back(to);
            return arc;
        }
        for (size_t step = 0; step < n; step++)
        {
            j = (j + 1) % n;
            if (!(arc.back() == pts[j]))
                arc.push_back(pts[j]);
            if (j == seg_to)
                break;
        }
        if (!(arc.back() == to))
            arc.push_back(to);
        return arc;
    };

    // the kept arc of the other loop: from p2 backward (i.e. to..p2 forward) when removing forward arc
    std::vector<Point2> other_arc;
    if (remove_forward)
    {
        other_arc = collectArc(op, c.seg_q2, c.q2, c.seg_p2, c.p2); // q2 -> p2 the long way
        std::reverse(other_arc.begin(), other_arc.end());           // p2 -> ... -> q2
    }
    else
    {
        other_arc = collectArc(op, c.seg_p2, c.p2, c.seg_q2, c.q2); // p2 -> q2 the long way
    }
    std::vector<Point2> source_arc = collectArc(sp, c.seg_q, c.q, c.seg_p, c.p); // q -> ... -> p

    std::vector<Point2> merged;
    merged.insert(merged.end(), source_arc.begin(), source_arc.end()); // q..p
    merged.insert(merged.end(), other_arc.begin(), other_arc.end());   // p2..q2
    // p->p2 is implied by consecutive points p, p2; q2 -> q closes the loop
    std::vector<Point2> dedup;
    for (const Point2& pt : merged)
        if (dedup.empty() || !(dedup.back() == pt))
            dedup.push_back(pt);
    if (dedup.size() >= 2 && dedup.front() == dedup.back())
        dedup.pop_back();

    if (bridges_out)
    {
        Bridge b;
        b.p = c.p; b.q = c.q; b.p2 = c.p2; b.q2 = c.q2;
        b.length = c.len;
        b.removed_arc_len = source_walk.arcLength(c.seg_p, c.p, c.seg_q, c.q)
                          + (remove_forward ? fwd : bwd);
        bridges_out->push_back(b);
    }
    loops[source].points = std::move(dedup);
    loops[source].closed = true;
    loops.erase(loops.begin() + c.other);
    return true;
}

/*!
 * Repeatedly bridge until a single closed toolpath remains, starting from the
 * smallest loops and working outward.  Throws when a loop has no admissible
 * bridge to any other loop.
 */
inline Polyline connectPolygons(std::vector<Polyline> loops, coord_t w,
                                BridgeCriteria criteria = BridgeCriteria::LowCurvature,
                                const Polygons* interior_ref = nullptr,
                                std::vector<Bridge>* bridges_out = nullptr)
{
    if (loops.empty())
        throw std::invalid_argument("connectPolygons: no loops");
    while (loops.size() > 1)
    {
        // smallest by enclosed area; ties by centroid order
        size_t smallest = 0;
        auto key = [&](size_t i) {
            Polygon poly{loops[i].points};
            Point2 c = poly.centroidApprox();
            return std::make_tuple(std::abs(poly.area()), c.x, c.y);
        };
        for (size_t i = 1; i < loops.size(); i++)
            if (key(i) < key(smallest))
                smallest = i;
        if (!buildBridge(loops, smallest, w, criteria, interior_ref, bridges_out))
        {
            Polygon poly{loops[smallest].points};
            Point2 c = poly.centroidApprox();
            throw std::runtime_error("unbridgeable component near (" + std::to_string(toMm(c.x)) + ", "
                                     + std::to_string(toMm(c.y)) + "): no bridge within 3/2 line width");
        }
    }
    loops[0].closed = true;
    return loops[0];
}

/*!
 * Merge fitted infill loops and wall perimeters into the final layer plan.
 * The outermost wall can be kept as a separate leading loop.
 */
inline LayerPlan connectToWalls(std::vector<Polyline> infill_loops, const Polygons& walls, coord_t z, coord_t w,
                                bool keep_outer_separate = false,
                                BridgeCriteria criteria = BridgeCriteria::LowCurvature)
{
    LayerPlan plan;
    plan.z = z;
    plan.line_width = w;
    plan.walls = walls;
    plan.infill_loops = infill_loops;
    std::vector<Polyline> loops = std::move(infill_loops);
    for (size_t i = 0; i < walls.size(); i++)
    {
        if (keep_outer_separate && i == 0)
            continue;
        Polyline wl;
        wl.points = walls[i].points;
        wl.closed = true;
        loops.push_back(std::move(wl));
    }
    for (const Polyline& l : loops)
        plan.input_length += l.length();
    plan.toolpath = connectPolygons(std::move(loops), w, criteria, &plan.walls, &plan.bridges);
    if (keep_outer_separate && !walls.empty())
    {
        plan.outer_wall.points = walls[0].points;
        plan.outer_wall.closed = true;
    }
    return plan;
}

} // namespace crossfoam
