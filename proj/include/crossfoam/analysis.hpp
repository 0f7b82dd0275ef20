#pragma once

#include <functional>

#include "density.hpp"
#include "infill.hpp"

namespace crossfoam {

/*! Axis-aligned box in mm. */
struct BoxRegion
{
    double x0, y0, z0, x1, y1, z1;
    double volume() const { return (x1 - x0) * (y1 - y0) * (z1 - z0); }
};

namespace detail {

/// length of the part of segment a-b (mm coords) inside [lo,hi] per axis
inline double segmentLengthInBox(double ax, double ay, double bx, double by, const BoxRegion& box)
{
    double dx = bx - ax, dy = by - ay;
    double t0 = 0, t1 = 1;
    auto clip = [&](double p, double q) {
        // p * t <= q
        if (p == 0)
            return q >= 0;
        double r = q / p;
        if (p < 0)
            t0 = std::max(t0, r);
        else
            t1 = std::min(t1, r);
        return true;
    };
    if (!clip(-dx, ax - box.x0) || !clip(dx, box.x1 - ax) || !clip(-dy, ay - box.y0) || !clip(dy, box.y1 - ay))
        return 0;
    if (t0 >= t1)
        return 0;
    return std::hypot(dx, dy) * (t1 - t0);
}

} // namespace detail

/*!
 * Extruded volume of the planned paths inside a region, over the region
 * volume: sum of (clipped segment length) * w * layer_height.
 */
inline double realizedDensity(const std::vector<LayerPlan>& plans, const BoxRegion& region, double layer_height)
{
    double volume = 0;
    for (const LayerPlan& plan : plans)
    {
        double z = toMm(plan.z);
        double zmid = z + layer_height / 2;
        if (zmid < region.z0 || zmid >= region.z1)
            continue;
        double w = toMm(plan.line_width);
        auto addPath = [&](const Polyline& path) {
            size_t n = path.points.size();
            if (n < 2)
                return;
            size_t count = path.closed ? n : n - 1;
            for (size_t i = 0; i < count; i++)
            {
                Point2 a = path.points[i];
                Point2 b = path.points[(i + 1) % n];
                volume += detail::segmentLengthInBox(toMm(a.x), toMm(a.y), toMm(b.x), toMm(b.y), region) * w
                        * layer_height;
            }
        };
        addPath(plan.toolpath);
        addPath(plan.outer_wall);
    }
    return volume / region.volume();
}

/// exact mean of the voxel field over an axis-aligned box (piecewise-constant voxels)
inline double boxMeanDensity(const DensityField& f, const BoxRegion& box)
{
    auto overlap1d = [](double a0, double a1, double b0, double b1) {
        return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    };
    int ix0 = std::max(0, static_cast<int>(std::floor((box.x0 - f.origin_x) / f.voxel_x)));
    int ix1 = std::min(f.nx - 1, static_cast<int>(std::floor((box.x1 - f.origin_x) / f.voxel_x)));
    int iy0 = std::max(0, static_cast<int>(std::floor((box.y0 - f.origin_y) / f.voxel_y)));
    int iy1 = std::min(f.ny - 1, static_cast<int>(std::floor((box.y1 - f.origin_y) / f.voxel_y)));
    int iz0 = std::max(0, static_cast<int>(std::floor((box.z0 - f.origin_z) / f.voxel_z)));
    int iz1 = std::min(f.nz - 1, static_cast<int>(std::floor((box.z1 - f.origin_z) / f.voxel_z)));
    double total = 0, weighted = 0;
    for (int iz = iz0; iz <= iz1; iz++)
    {
        double oz = overlap1d(box.z0, box.z1, f.origin_z + iz * f.voxel_z, f.origin_z + (iz + 1) * f.voxel_z);
        if (oz <= 0) continue;
        for (int iy = iy0; iy <= iy1; iy++)
        {
            double oy = overlap1d(box.y0, box.y1, f.origin_y + iy * f.voxel_y, f.origin_y + (iy + 1) * f.voxel_y);
            if (oy <= 0) continue;
            for (int ix = ix0; ix <= ix1; ix++)
            {
                double ox = overlap1d(box.x0, box.x1, f.origin_x + ix * f.voxel_x, f.origin_x + (ix + 1) * f.voxel_x);
                if (ox <= 0) continue;
                double v = ox * oy * oz;
                total += v;
                weighted += v * f.at(ix, iy, iz);
            }
        }
    }
    if (total <= 0)
        return f.sample((box.x0 + box.x1) / 2, (box.y0 + box.y1) / 2, (box.z0 + box.z1) / 2);
    return weighted / total;
}

/*!
 * Mean absolute local error between the density specification and the
 * realized structure, at a given viewing kernel: the bounding cube is split
 * into subcubes of roughly the kernel size and errors averaged over them.
 */
inline double localError(const DensityField& spec, const std::vector<LayerPlan>& plans, const BoxRegion& cube,
                         double kernel_mm, double layer_height)
{
    double side = cube.x1 - cube.x0;
    int n = std::max(1, static_cast<int>(std::llround(side / kernel_mm)));
    double step = side / n;
    int nz = std::max(1, static_cast<int>(std::llround((cube.z1 - cube.z0) / kernel_mm)));
    double step_z = (cube.z1 - cube.z0) / nz;
    double err = 0;
    size_t cells = 0;
    for (int iz = 0; iz < nz; iz++)
        for (int iy = 0; iy < n; iy++)
            for (int ix = 0; ix < n; ix++)
            {
                BoxRegion sub{cube.x0 + ix * step,      cube.y0 + iy * step,      cube.z0 + iz * step_z,
                              cube.x0 + (ix + 1) * step, cube.y0 + (iy + 1) * step, cube.z0 + (iz + 1) * step_z};
                double want = boxMeanDensity(spec, sub);
                double got = realizedDensity(plans, sub, layer_height);
                err += std::abs(want - got);
                cells++;
            }
    return err / static_cast<double>(cells);
}

inline std::vector<std::pair<double, double>> localErrorCurve(const DensityField& spec,
                                                              const std::vector<LayerPlan>& plans,
                                                              const BoxRegion& cube,
                                                              const std::vector<double>& kernels_mm,
                                                              double layer_height)
{
    std::vector<std::pair<double, double>> out;
    for (double k : kernels_mm)
        out.push_back({k, localError(spec, plans, cube, k, layer_height)});
    return out;
}

// ---------------------------------------------------------------------------
// compensation curve

/*!
 * Maps requested output density to the simplified density the grading stage
 * should target, from self-measured samples: a monotone piecewise-cubic fit
 * of simplified -> realized, inverted by bisection.
 */
class CompensationCurve
{
public:
    std::vector<double> xs; // simplified density samples
    std::vector<double> ys; // realized density (locally averaged, made monotone)
    std::vector<double> ms; // interpolation slopes
    std::vector<std::string> warnings;

    static CompensationCurve fit(std::vector<std::pair<double, double>> samples, double monotone_tolerance = 1e-3)
    {
        std::sort(samples.begin(), samples.end());
        CompensationCurve c;
        if (samples.size() < 2)
            throw std::invalid_argument("compensation fit needs at least 2 samples");
        // local averaging (1-2-1) of realized values
        std::vector<double> avg(samples.size());
        for (size_t i = 0; i < samples.size(); i++)
        {
            double s = samples[i].second * 2, wsum = 2;
            if (i > 0) { s += samples[i - 1].second; wsum += 1; }
            if (i + 1 < samples.size()) { s += samples[i + 1].second; wsum += 1; }
            avg[i] = s / wsum;
        }
        // report and pool monotonicity violations
        for (size_t i = 1; i < avg.size(); i++)
            if (avg[i] < avg[i - 1] - monotone_tolerance)
                c.warnings.push_back("non-monotone realized density between simplified "
                                     + std::to_string(samples[i - 1].first) + " and "
                                     + std::to_string(samples[i].first));
        for (size_t i = 1; i < avg.size(); i++)
            if (avg[i] < avg[i - 1])
                avg[i] = avg[i - 1];
        for (size_t i = 0; i < samples.size(); i++)
        {
            c.xs.push_back(samples[i].first);
            c.ys.push_back(avg[i]);
        }
        c.computeSlopes();
        return c;
    }

    /// simplified -> realized
    double map(double x) const
    {
        size_t n = xs.size();
        if (x <= xs.front())
            return ys.front() + ms.front() * (x - xs.front());
        if (x >= xs.back())
            return ys.back() + ms.back() * (x - xs.back());
        size_t i = 0;
        while (i + 2 < n && xs[i + 1] < x)
            i++;
        double h = xs[i + 1] - xs[i];
        double t = (x - xs[i]) / h;
        double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
        double h10 = t * (1 - t) * (1 - t);
        double h01 = t * t * (3 - 2 * t);
        double h11 = t * t * (t - 1);
        return h00 * ys[i] + h10 * h * ms[i] + h01 * ys[i + 1] + h11 * h * ms[i + 1];
    }

    /// realized -> simplified (inverse on the fitted range)
    double inverse(double y) const
    {
        double lo = xs.front(), hi = xs.back();
        if (y <= map(lo))
            return lo;
        if (y >= map(hi))
            return hi;
        for (int it = 0; it < 60; it++)
        {
            double mid = (lo + hi) / 2;
            if (map(mid) < y)
                lo = mid;
            else
                hi = mid;
        }
        return (lo + hi) / 2;
    }

private:
    void computeSlopes()
    {
        // Fritsch-Carlson monotone cubic slopes
        size_t n = xs.size();
        std::vector<double> d(n - 1);
        for (size_t i = 0; i + 1 < n; i++)
            d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        ms.assign(n, 0.0);
        ms[0] = d[0];
        ms[n - 1] = d[n - 2];
        for (size_t i = 1; i + 1 < n; i++)
            ms[i] = (d[i - 1] * d[i] <= 0) ? 0.0 : (d[i - 1] + d[i]) / 2;
        for (size_t i = 0; i + 1 < n; i++)
        {
            if (d[i] == 0)
            {
                ms[i] = ms[i + 1] = 0;
                continue;
            }
            double a = ms[i] / d[i];
            double b = ms[i + 1] / d[i];
            double s = a * a + b * b;
            if (s > 9)
            {
                double tau = 3.0 / std::sqrt(s);
                ms[i] = tau * a * d[i];
                ms[i + 1] = tau * b * d[i];
            }
        }
    }
};

// ---------------------------------------------------------------------------
// procedural density specifications used in the accuracy experiments

namespace testspecs {

inline DensityField homogeneous(double value, double side_mm, int res = 64)
{
    DensityField f(res, res, res);
    f.voxel_x = f.voxel_y = f.voxel_z = side_mm / res;
    f.fill([&](double, double, double) { return value; });
    return f;
}

/// linear gradient from lo at one bottom corner to hi at the opposite top corner
inline DensityField diagonalGradient(double lo, double hi, double side_mm, int res = 64)
{
    DensityField f(res, res, res);
    f.voxel_x = f.voxel_y = f.voxel_z = side_mm / res;
    f.fill([&](double x, double y, double z) {
        double t = (x + y + z) / (3 * side_mm);
        return lo + (hi - lo) * std::clamp(t, 0.0, 1.0);
    });
    return f;
}

/// two half-spaces split by a plane at 22.5 deg to X in-plane with 45 deg overhang
inline DensityField contrastPlane(double lo, double hi, double side_mm, int res = 64)
{
    DensityField f(res, res, res);
    f.voxel_x = f.voxel_y = f.voxel_z = side_mm / res;
    double a = 22.5 * std::numbers::pi / 180.0;
    // normal of a plane containing the horizontal direction (cos a, sin a, 0)
    // and climbing at 45 degrees
    double nx = std::sin(a) * std::numbers::sqrt2 / 2;
    double ny = -std::cos(a) * std::numbers::sqrt2 / 2;
    double nz = std::numbers::sqrt2 / 2;
    double c = side_mm / 2;
    f.fill([&](double x, double y, double z) {
        double s = nx * (x - c) + ny * (y - c) + nz * (z - c);
        return s < 0 ? lo : hi;
    });
    return f;
}

/// spherical shell of radius side/2 and thickness side/7; dense on the shell
inline DensityField sphereShell(double lo, double hi, double side_mm, int res = 64)
{
    DensityField f(res, res, res);
    f.voxel_x = f.voxel_y = f.voxel_z = side_mm / res;
    double c = side_mm / 2;
    double r = side_mm / 2;
    double t = side_mm / 7;
    f.fill([&](double x, double y, double z) {
        double d = std::sqrt((x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c));
        return (d <= r && d >= r - t) ? hi : lo;
    });
    return f;
}

} // namespace testspecs

} // namespace crossfoam
