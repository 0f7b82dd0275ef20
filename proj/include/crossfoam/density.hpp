#pragma once

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "fixed.hpp"

namespace crossfoam {

struct GrayMap
{
    double gray_at_zero = 0.0;   // gray value mapped to 0% density
    double gray_at_full = 255.0; // gray value mapped to 100% density

    double densityOf(double gray) const
    {
        double t = (gray - gray_at_zero) / (gray_at_full - gray_at_zero);
        return std::clamp(t, 0.0, 1.0);
    }
};

/*!
 * Voxel grid of target densities in [0,1].  Queries outside the grid clamp to
 * the nearest voxel.  Everything is in mm here; the fixed-point grid only
 * matters for cell geometry.
 */
class DensityField
{
public:
    int nx = 0, ny = 0, nz = 0;
    double voxel_x = 1.0, voxel_y = 1.0, voxel_z = 1.0; // mm per voxel per axis
    double origin_x = 0.0, origin_y = 0.0, origin_z = 0.0;
    std::vector<float> values; // x-major within a slice, slices stacked

    DensityField() = default;
    DensityField(int nx, int ny, int nz) : nx(nx), ny(ny), nz(nz), values(static_cast<size_t>(nx) * ny * nz, 0.f) {}

    float& at(int ix, int iy, int iz)
    {
        return values[(static_cast<size_t>(iz) * ny + iy) * nx + ix];
    }
    float at(int ix, int iy, int iz) const
    {
        return values[(static_cast<size_t>(iz) * ny + iy) * nx + ix];
    }

    /// density of the voxel containing (or nearest to) a point in mm
    double sample(double x, double y, double z) const
    {
        int ix = clampIndex((x - origin_x) / voxel_x, nx);
        int iy = clampIndex((y - origin_y) / voxel_y, ny);
        int iz = clampIndex((z - origin_z) / voxel_z, nz);
        return at(ix, iy, iz);
    }

    /// fill from a function of the voxel center position (procedural test specs)
    template <typename F>
    void fill(F&& f)
    {
        for (int iz = 0; iz < nz; iz++)
            for (int iy = 0; iy < ny; iy++)
                for (int ix = 0; ix < nx; ix++)
                {
                    double x = origin_x + (ix + 0.5) * voxel_x;
                    double y = origin_y + (iy + 0.5) * voxel_y;
                    double z = origin_z + (iz + 0.5) * voxel_z;
                    at(ix, iy, iz) = static_cast<float>(std::clamp(f(x, y, z), 0.0, 1.0));
                }
    }

    static int clampIndex(double v, int n)
    {
        int i = static_cast<int>(std::floor(v));
        return std::clamp(i, 0, n - 1);
    }
};

// ---------------------------------------------------------------------------
// image loading

namespace detail {

struct GrayImage
{
    int width = 0, height = 0;
    std::vector<uint8_t> pixels;
};

inline GrayImage loadPgm(const std::string& path)
{
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        throw std::runtime_error("cannot open image: " + path);
    auto next_token = [&]() -> std::string {
        std::string tok;
        int c;
        while ((c = std::fgetc(f)) != EOF)
        {
            if (c == '#')
            {
                while ((c = std::fgetc(f)) != EOF && c != '\n') {}
                continue;
            }
            if (std::isspace(c))
            {
                if (!tok.empty())
                    break;
                continue;
            }
            tok.push_back(static_cast<char>(c));
        }
        return tok;
    };
    std::string magic = next_token();
    if (magic != "P5" && magic != "P2")
    {
        std::fclose(f);
        throw std::runtime_error("unsupported PGM magic in " + path);
    }
    GrayImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval <= 0 || maxval > 255)
    {
        std::fclose(f);
        throw std::runtime_error("only 8-bit PGM supported: " + path);
    }
    img.pixels.resize(static_cast<size_t>(img.width) * img.height);
    if (magic == "P5")
    {
        if (std::fread(img.pixels.data(), 1, img.pixels.size(), f) != img.pixels.size())
        {
            std::fclose(f);
            throw std::runtime_error("truncated PGM: " + path);
        }
    }
    else
    {
        for (auto& px : img.pixels)
            px = static_cast<uint8_t>(std::stoi(next_token()));
    }
    std::fclose(f);
    return img;
}

inline GrayImage loadPng(const std::string& path)
{
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f)
        throw std::runtime_error("cannot open image: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png)))
    {
        std::fclose(f);
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to read PNG: " + path);
    }
    png_init_io(png, f);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    int color_type = png_get_color_type(png, info);
    if (color_type & PNG_COLOR_MASK_COLOR)
        png_set_rgb_to_gray(png, 1, -1, -1);
    png_read_update_info(png, info);
    GrayImage img;
    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.pixels.resize(static_cast<size_t>(img.width) * img.height);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; y++)
        rows[y] = img.pixels.data() + static_cast<size_t>(y) * img.width;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(f);
    return img;
}

inline GrayImage loadGrayImage(const std::string& path)
{
    if (path.size() >= 4)
    {
        std::string ext = path.substr(path.size() - 4);
        for (char& c : ext) c = static_cast<char>(std::tolower(c));
        if (ext == ".pgm")
            return loadPgm(path);
        if (ext == ".png")
            return loadPng(path);
    }
    throw std::runtime_error("unsupported image format (need .png or .pgm): " + path);
}

} // namespace detail

/*!
 * Build a density field from a stack of gray-scale images, one per voxel
 * slab in z, mapped linearly between the two gray endpoints.
 */
inline DensityField loadImageStack(const std::vector<std::string>& files, const GrayMap& gray_map,
                                   double voxel_x, double voxel_y, double voxel_z,
                                   double origin_x = 0, double origin_y = 0, double origin_z = 0)
{
    if (files.empty())
        throw std::runtime_error("density image stack is empty");
    DensityField field;
    field.voxel_x = voxel_x; field.voxel_y = voxel_y; field.voxel_z = voxel_z;
    field.origin_x = origin_x; field.origin_y = origin_y; field.origin_z = origin_z;
    for (size_t i = 0; i < files.size(); i++)
    {
        detail::GrayImage img = detail::loadGrayImage(files[i]);
        if (i == 0)
        {
            field.nx = img.width;
            field.ny = img.height;
            field.nz = static_cast<int>(files.size());
            field.values.resize(static_cast<size_t>(field.nx) * field.ny * field.nz);
        }
        else if (img.width != field.nx || img.height != field.ny)
        {
            throw std::runtime_error("image dimensions differ from first slice: " + files[i]);
        }
        for (int y = 0; y < field.ny; y++)
            for (int x = 0; x < field.nx; x++)
            {
                // image row 0 is the top; voxel row 0 is minimal y
                uint8_t g = img.pixels[static_cast<size_t>(field.ny - 1 - y) * field.nx + x];
                field.at(x, y, static_cast<int>(i)) = static_cast<float>(gray_map.densityOf(g));
            }
    }
    return field;
}

// ---------------------------------------------------------------------------
// prism integration

/*! A vertical prism over a right triangle, in mm, for density queries. */
struct PrismRegion
{
    double ax, ay, bx, by, cx, cy; // base triangle
    double z0, z1;

    double area() const
    {
        return std::abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay)) / 2.0;
    }
    double volume() const { return area() * (z1 - z0); }
};

namespace detail {

/// area of a convex-clipped triangle against an axis-aligned box column
inline double triangleBoxArea(const PrismRegion& p, double x0, double x1, double y0, double y1)
{
    // Sutherland-Hodgman against the four slab planes
    std::vector<std::pair<double, double>> poly = {{p.ax, p.ay}, {p.bx, p.by}, {p.cx, p.cy}};
    auto clip = [&](auto inside, auto intersect) {
        std::vector<std::pair<double, double>> out;
        size_t n = poly.size();
        for (size_t i = 0; i < n; i++)
        {
            auto a = poly[i];
            auto b = poly[(i + 1) % n];
            bool ia = inside(a), ib = inside(b);
            if (ia)
                out.push_back(a);
            if (ia != ib)
                out.push_back(intersect(a, b));
        }
        poly = std::move(out);
    };
    auto lerp = [](std::pair<double, double> a, std::pair<double, double> b, double t) {
        return std::make_pair(a.first + (b.first - a.first) * t, a.second + (b.second - a.second) * t);
    };
    clip([&](auto q) { return q.first >= x0; },
         [&](auto a, auto b) { return lerp(a, b, (x0 - a.first) / (b.first - a.first)); });
    if (poly.empty()) return 0.0;
    clip([&](auto q) { return q.first <= x1; },
         [&](auto a, auto b) { return lerp(a, b, (x1 - a.first) / (b.first - a.first)); });
    if (poly.empty()) return 0.0;
    clip([&](auto q) { return q.second >= y0; },
         [&](auto a, auto b) { return lerp(a, b, (y0 - a.second) / (b.second - a.second)); });
    if (poly.empty()) return 0.0;
    clip([&](auto q) { return q.second <= y1; },
         [&](auto a, auto b) { return lerp(a, b, (y1 - a.second) / (b.second - a.second)); });
    if (poly.size() < 3) return 0.0;
    double a2 = 0;
    for (size_t i = 0; i < poly.size(); i++)
    {
        auto& u = poly[i];
        auto& v = poly[(i + 1) % poly.size()];
        a2 += u.first * v.second - v.first * u.second;
    }
    return std::abs(a2) / 2.0;
}

} // namespace detail

/*!
 * Average requested density over a prism: sum of voxel-intersection volumes
 * weighted by voxel density, over the total intersection volume.  A prism
 * entirely outside the voxel set takes the density of its nearest voxel.
 */
inline double targetDensity(const DensityField& f, const PrismRegion& p)
{
    double xmin = std::min({p.ax, p.bx, p.cx});
    double xmax = std::max({p.ax, p.bx, p.cx});
    double ymin = std::min({p.ay, p.by, p.cy});
    double ymax = std::max({p.ay, p.by, p.cy});
    int ix0 = std::max(0, static_cast<int>(std::floor((xmin - f.origin_x) / f.voxel_x)));
    int ix1 = std::min(f.nx - 1, static_cast<int>(std::floor((xmax - f.origin_x) / f.voxel_x)));
    int iy0 = std::max(0, static_cast<int>(std::floor((ymin - f.origin_y) / f.voxel_y)));
    int iy1 = std::min(f.ny - 1, static_cast<int>(std::floor((ymax - f.origin_y) / f.voxel_y)));
    int iz0 = std::max(0, static_cast<int>(std::floor((p.z0 - f.origin_z) / f.voxel_z)));
    int iz1 = std::min(f.nz - 1, static_cast<int>(std::floor((p.z1 - f.origin_z) / f.voxel_z)));

    double total = 0, weighted = 0;
    if (ix0 <= ix1 && iy0 <= iy1 && iz0 <= iz1)
    {
        for (int iy = iy0; iy <= iy1; iy++)
            for (int ix = ix0; ix <= ix1; ix++)
            {
                double x0 = f.origin_x + ix * f.voxel_x;
                double y0 = f.origin_y + iy * f.voxel_y;
                double area = detail::triangleBoxArea(p, x0, x0 + f.voxel_x, y0, y0 + f.voxel_y);
                if (area <= 0)
                    continue;
                for (int iz = iz0; iz <= iz1; iz++)
                {
                    double zlo = std::max(p.z0, f.origin_z + iz * f.voxel_z);
                    double zhi = std::min(p.z1, f.origin_z + (iz + 1) * f.voxel_z);
                    if (zhi <= zlo)
                        continue;
                    double vol = area * (zhi - zlo);
                    total += vol;
                    weighted += vol * f.at(ix, iy, iz);
                }
            }
    }
    if (total <= 0)
    {
        // nearest voxel via clamped lookup of the prism centroid
        double cx = (p.ax + p.bx + p.cx) / 3.0;
        double cy = (p.ay + p.by + p.cy) / 3.0;
        return f.sample(cx, cy, (p.z0 + p.z1) / 2.0);
    }
    return weighted / total;
}

inline double targetMass(const DensityField& f, const PrismRegion& p)
{
    return targetDensity(f, p) * p.volume();
}

/*!
 * Monte-Carlo estimate of the same integral; used as an independent check and
 * as a fallback integrator.  Deterministically seeded.
 */
inline double targetDensityMonteCarlo(const DensityField& f, const PrismRegion& p, size_t samples,
                                      uint64_t seed = 0x5eed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double acc = 0;
    for (size_t i = 0; i < samples; i++)
    {
        double u = uni(rng), v = uni(rng);
        if (u + v > 1.0)
        {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        double x = p.ax + u * (p.bx - p.ax) + v * (p.cx - p.ax);
        double y = p.ay + u * (p.by - p.ay) + v * (p.cy - p.ay);
        double z = p.z0 + uni(rng) * (p.z1 - p.z0);
        acc += f.sample(x, y, z);
    }
    return acc / samples;
}

} // namespace crossfoam
