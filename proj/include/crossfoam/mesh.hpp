#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "polygon.hpp"

namespace crossfoam {

struct TriangleMesh
{
    std::vector<Point3> vertices;
    struct Tri { int v[3]; };
    std::vector<Tri> triangles;

    Point3 boundingBoxMin() const
    {
        Point3 m{INT64_MAX, INT64_MAX, INT64_MAX};
        for (const Point3& p : vertices)
        {
            m.x = std::min(m.x, p.x); m.y = std::min(m.y, p.y); m.z = std::min(m.z, p.z);
        }
        return m;
    }
    Point3 boundingBoxMax() const
    {
        Point3 m{INT64_MIN, INT64_MIN, INT64_MIN};
        for (const Point3& p : vertices)
        {
            m.x = std::max(m.x, p.x); m.y = std::max(m.y, p.y); m.z = std::max(m.z, p.z);
        }
        return m;
    }
};

namespace detail {

struct Point3Hash
{
    size_t operator()(const Point3& p) const
    {
        size_t h = std::hash<coord_t>()(p.x);
        h = h * 31 + std::hash<coord_t>()(p.y);
        h = h * 31 + std::hash<coord_t>()(p.z);
        return h;
    }
};

inline void addTriangle(TriangleMesh& mesh, std::unordered_map<Point3, int, Point3Hash>& weld,
                        const std::array<Point3, 3>& corners)
{
    int idx[3];
    for (int i = 0; i < 3; i++)
    {
        auto it = weld.find(corners[i]);
        if (it == weld.end())
        {
            idx[i] = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(corners[i]);
            weld.emplace(corners[i], idx[i]);
        }
        else
            idx[i] = it->second;
    }
    if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2])
        return; // degenerate after rounding
    mesh.triangles.push_back({{idx[0], idx[1], idx[2]}});
}

} // namespace detail

inline TriangleMesh loadStl(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open STL file: " + path);
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    TriangleMesh mesh;
    std::unordered_map<Point3, int, detail::Point3Hash> weld;

    bool ascii = data.size() >= 6 && std::strncmp(data.data(), "solid", 5) == 0;
    if (ascii)
    {
        // verify it is not a binary file starting with "solid"
        std::string s(data.begin(), data.end());
        if (s.find("facet") == std::string::npos)
            ascii = false;
        if (ascii)
        {
            std::istringstream ss(s);
            std::string tok;
            std::array<Point3, 3> corners;
            int ci = 0;
            while (ss >> tok)
            {
                if (tok == "vertex")
                {
                    double x, y, z;
                    ss >> x >> y >> z;
                    corners[ci % 3] = {fromMm(x), fromMm(y), fromMm(z)};
                    ci++;
                    if (ci % 3 == 0)
                        detail::addTriangle(mesh, weld, corners);
                }
            }
            return mesh;
        }
    }
    if (data.size() < 84)
        throw std::runtime_error("truncated STL file: " + path);
    uint32_t count;
    std::memcpy(&count, data.data() + 80, 4);
    if (data.size() < 84 + static_cast<size_t>(count) * 50)
        throw std::runtime_error("truncated binary STL: " + path);
    for (uint32_t t = 0; t < count; t++)
    {
        const char* rec = data.data() + 84 + static_cast<size_t>(t) * 50;
        std::array<Point3, 3> corners;
        for (int i = 0; i < 3; i++)
        {
            float v[3];
            std::memcpy(v, rec + 12 + i * 12, 12);
            corners[i] = {fromMm(v[0]), fromMm(v[1]), fromMm(v[2])};
        }
        detail::addTriangle(mesh, weld, corners);
    }
    return mesh;
}

struct SlicedLayer
{
    coord_t z = 0;
    Polygons outline;
};

/*!
 * Plane cut of a closed mesh at fixed heights.  Directed intersection
 * segments are linked into loops by exact endpoint match, with gap stitching
 * up to a tolerance for imperfect models.
 */
class MeshSlicer
{
public:
    coord_t gap_tolerance = 20; // 0.02 mm default stitching tolerance

    std::vector<SlicedLayer> slice(const TriangleMesh& mesh, coord_t layer_height, coord_t first_layer_z) const
    {
        std::set<coord_t> vertex_zs;
        for (const Point3& v : mesh.vertices)
            vertex_zs.insert(v.z);
        coord_t z_max = mesh.boundingBoxMax().z;
        std::vector<SlicedLayer> layers;
        for (coord_t z = first_layer_z, index = 0; z < z_max; z += layer_height, index++)
        {
            coord_t zq = z;
            while (vertex_zs.count(zq))
                zq += 1; // avoid cutting exactly through vertices
            SlicedLayer layer;
            layer.z = z;
            layer.outline = sliceAt(mesh, zq, index);
            layers.push_back(std::move(layer));
        }
        return layers;
    }

private:
    Polygons sliceAt(const TriangleMesh& mesh, coord_t z, coord_t layer_index) const
    {
        struct Segment { Point2 from, to; };
        std::vector<Segment> segments;
        for (const TriangleMesh::Tri& t : mesh.triangles)
        {
            Point3 p[3] = {mesh.vertices[t.v[0]], mesh.vertices[t.v[1]], mesh.vertices[t.v[2]]};
            // gather the two edges crossing z, oriented so that material lies left
            Point2 from, to;
            int below = 0;
            for (int i = 0; i < 3; i++)
                if (p[i].z < z)
                    below++;
            if (below == 0 || below == 3)
                continue;
            // rotate so that the single vertex on one side is p[0]
            auto cut = [&](const Point3& a, const Point3& b) -> Point2 {
                return {lerpRound(a.x, b.x, z - a.z, b.z - a.z), lerpRound(a.y, b.y, z - a.z, b.z - a.z)};
            };
            if (below == 1)
            {
                int lone = (p[0].z < z) ? 0 : (p[1].z < z) ? 1 : 2;
                const Point3 &a = p[lone], &b = p[(lone + 1) % 3], &c = p[(lone + 2) % 3];
                from = cut(a, b);
                to = cut(a, c);
                // CCW triangle seen from +z with a below: segment a->b cut to a->c cut keeps interior left
                segments.push_back({to, from});
            }
            else
            {
                int lone = (p[0].z >= z) ? 0 : (p[1].z >= z) ? 1 : 2;
                const Point3 &a = p[lone], &b = p[(lone + 1) % 3], &c = p[(lone + 2) % 3];
                from = cut(a, b);
                to = cut(a, c);
                segments.push_back({from, to});
            }
        }
        // link segments into loops
        std::unordered_multimap<Point2, size_t, Point2Hash> by_start;
        std::vector<bool> used(segments.size(), false);
        for (size_t i = 0; i < segments.size(); i++)
            by_start.emplace(segments[i].from, i);
        Polygons out;
        for (size_t i = 0; i < segments.size(); i++)
        {
            if (used[i] || segments[i].from == segments[i].to)
                continue;
            Polygon loop;
            size_t cur = i;
            used[i] = true;
            loop.points.push_back(segments[i].from);
            while (true)
            {
                Point2 tail = segments[cur].to;
                if (tail == loop.points.front())
                    break; // closed
                loop.points.push_back(tail);
                size_t next = SIZE_MAX;
                auto range = by_start.equal_range(tail);
                for (auto it = range.first; it != range.second; ++it)
                    if (!used[it->second]) { next = it->second; break; }
                if (next == SIZE_MAX)
                {
                    // gap stitching: nearest unused start within tolerance
                    double best = static_cast<double>(gap_tolerance);
                    for (size_t j = 0; j < segments.size(); j++)
                        if (!used[j])
                        {
                            double d = vSize(segments[j].from - tail);
                            if (d <= best) { best = d; next = j; }
                        }
                    if (next == SIZE_MAX)
                    {
                        double closing = vSize(tail - loop.points.front());
                        if (closing <= gap_tolerance)
                            break; // close through the gap
                        throw std::runtime_error(
                            "open contour on layer " + std::to_string(layer_index) + ": gap of "
                            + std::to_string(closing / kUnitsPerMm) + " mm exceeds stitch tolerance");
                    }
                }
                used[next] = true;
                cur = next;
            }
            if (loop.points.size() >= 3)
                out.add(std::move(loop));
        }
        return out;
    }
};

inline std::vector<SlicedLayer> sliceMesh(const TriangleMesh& mesh, coord_t layer_height, coord_t first_layer_z)
{
    return MeshSlicer().slice(mesh, layer_height, first_layer_z);
}

} // namespace crossfoam
