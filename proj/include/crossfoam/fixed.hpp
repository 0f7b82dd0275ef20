#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>

namespace crossfoam {

/*
 * All geometry is stored in fixed-point integer coordinates.  One millimeter
 * is kUnitsPerMm units; the representable range covers models up to a meter
 * with exact 64-bit cross products on coordinate differences.
 */
using coord_t = int64_t;

inline constexpr coord_t kUnitsPerMm = 1000;

inline double toMm(coord_t v) { return static_cast<double>(v) / kUnitsPerMm; }
inline coord_t fromMm(double mm) { return static_cast<coord_t>(std::llround(mm * kUnitsPerMm)); }

struct Point2
{
    coord_t x = 0;
    coord_t y = 0;

    constexpr Point2() = default;
    constexpr Point2(coord_t x, coord_t y) : x(x), y(y) {}

    constexpr Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
    constexpr Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
    constexpr Point2 operator-() const { return {-x, -y}; }
    constexpr Point2 operator*(coord_t s) const { return {x * s, y * s}; }
    constexpr Point2 operator/(coord_t s) const { return {x / s, y / s}; }
    constexpr bool operator==(const Point2& o) const = default;
};

struct Point3
{
    coord_t x = 0;
    coord_t y = 0;
    coord_t z = 0;

    constexpr Point3() = default;
    constexpr Point3(coord_t x, coord_t y, coord_t z) : x(x), y(y), z(z) {}
    constexpr Point2 flatten() const { return {x, y}; }
    constexpr Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr bool operator==(const Point3& o) const = default;
};

inline constexpr coord_t dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
inline constexpr coord_t cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline constexpr coord_t vSize2(const Point2& a) { return dot(a, a); }
inline double vSize(const Point2& a) { return std::sqrt(static_cast<double>(vSize2(a))); }

inline Point2 midpoint(const Point2& a, const Point2& b)
{
    // arithmetic shift keeps subdivision exact while coordinates stay even
    return {(a.x + b.x) >> 1, (a.y + b.y) >> 1};
}

/// a + t * (b - a) for t = num/den, rounded to the grid
inline coord_t lerpRound(coord_t a, coord_t b, coord_t num, coord_t den)
{
    assert(den != 0);
    __int128 v = static_cast<__int128>(b - a) * num;
    __int128 half = den > 0 ? den / 2 : -den / 2;
    __int128 r = (v >= 0) ? (v + half) / den : (v - half) / den;
    return a + static_cast<coord_t>(r);
}

inline Point2 lerpRound(const Point2& a, const Point2& b, coord_t num, coord_t den)
{
    return {lerpRound(a.x, b.x, num, den), lerpRound(a.y, b.y, num, den)};
}

/// unit-ish vector of given length along v (double rounding)
inline Point2 normal(const Point2& v, coord_t length)
{
    double len = vSize(v);
    assert(len > 0);
    return {static_cast<coord_t>(std::llround(v.x * length / len)),
            static_cast<coord_t>(std::llround(v.y * length / len))};
}

inline constexpr Point2 turn90CCW(const Point2& v) { return {-v.y, v.x}; }

struct Point2Hash
{
    size_t operator()(const Point2& p) const
    {
        size_t h = std::hash<coord_t>()(p.x);
        return h ^ (std::hash<coord_t>()(p.y) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
};

} // namespace crossfoam
