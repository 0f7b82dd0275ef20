#pragma once

#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "analysis.hpp"
#include "gcode.hpp"
#include "grading.hpp"
#include "mesh.hpp"
#include "offset.hpp"

namespace crossfoam {

struct RunConfig
{
    std::string model_path;                  // .stl mesh or .json layer stack
    std::vector<std::string> density_files;  // gray-scale image stack
    GrayMap gray_map{255.0, 0.0};            // white empty, black solid
    double voxel_x = 1.0, voxel_y = 1.0, voxel_z = 1.0;
    PrintProfile profile;
    coord_t l_init_override = 0;             // 0: auto-fit the model bounding box
    int max_depth_override = -1;             // <0: deepest printable level
    int wall_count = 0;
    bool keep_outer_separate = false;
    int skin_min_level = 0;                  // 0: skin support disabled
    double top_skin_mm = 0.0;
    std::string compensation_path;           // optional CSV of simplified,realized
    std::string output_dir = "out";
    int threads = 1;
};

/*! Per-layer geometry input when bypassing mesh slicing. */
inline std::vector<SlicedLayer> loadLayerJson(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open layer file: " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    std::vector<SlicedLayer> layers;
    for (const auto& jl : doc)
    {
        SlicedLayer layer;
        layer.z = fromMm(jl.at("z").get<double>());
        for (const auto& jloop : jl.at("loops"))
        {
            Polygon poly;
            for (const auto& jp : jloop)
                poly.points.push_back({fromMm(jp.at(0).get<double>()), fromMm(jp.at(1).get<double>())});
            layer.outline.add(std::move(poly));
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

/*!
 * Starting cube: the smallest power-of-two multiple of the line width that
 * encloses the model bounding box, centered on it in the plane and based at
 * its bottom.
 */
inline std::pair<Point3, coord_t> startingCube(Point3 bb_min, Point3 bb_max, coord_t line_width,
                                               coord_t override_side = 0)
{
    coord_t need = std::max({bb_max.x - bb_min.x, bb_max.y - bb_min.y, bb_max.z - bb_min.z});
    coord_t side = override_side;
    if (side == 0)
    {
        side = line_width;
        while (side < need)
            side *= 2;
    }
    else if (side < need)
    {
        throw std::invalid_argument("starting cube override does not enclose the model");
    }
    Point3 origin;
    origin.x = (bb_min.x + bb_max.x) / 2 - side / 2;
    origin.y = (bb_min.y + bb_max.y) / 2 - side / 2;
    origin.z = bb_min.z;
    return {origin, side};
}

/*! Apply a compensation curve to a density specification in place. */
inline void applyCompensation(DensityField& field, const CompensationCurve& curve)
{
    for (float& v : field.values)
        v = static_cast<float>(curve.inverse(v));
}

struct PipelineResult
{
    SubdivisionForest forest;
    SurfaceModel surface;
    GradingReport grading;
    std::vector<LayerPlan> plans;
    std::vector<LayerCurve> raw_curves;
};

/*!
 * Grade a forest against a density field (lower bound pass plus dithering)
 * and build the enforced surface.
 */
inline PipelineResult buildStructure(const DensityField& field, coord_t l_init, coord_t line_width, int max_depth,
                                     Point3 origin = {})
{
    PipelineResult r;
    r.forest = SubdivisionForest(l_init, line_width, max_depth, origin);
    buildLowerBound(r.forest, field);
    r.grading = dither(r.forest, field);
    r.surface = buildSurface(r.forest);
    return r;
}

/*! Top-skin regions: parts of a layer not covered by the layers above it. */
inline std::vector<SkinArea> computeTopSkins(const std::vector<SlicedLayer>& layers, double top_skin_mm,
                                             coord_t layer_height)
{
    std::vector<SkinArea> skins;
    if (top_skin_mm <= 0)
        return skins;
    int span = std::max<int>(1, static_cast<int>(std::llround(top_skin_mm / toMm(layer_height))));
    for (size_t i = 0; i < layers.size(); i++)
    {
        size_t j = i + span;
        Polygons uncovered =
            j < layers.size() ? polygonsDifference(layers[i].outline, layers[j].outline) : layers[i].outline;
        if (!uncovered.empty())
            skins.push_back({layers[i].z, std::move(uncovered)});
    }
    return skins;
}

/*!
 * Plan one layer: perimeters, fitted infill and the bridged single toolpath.
 * The fit area is the infill region shrunk by half a line width.
 */
inline LayerPlan planLayer(const LayerCurve& curve, const Polygons& outline, const RunConfig& cfg)
{
    const coord_t w = cfg.profile.lineWidthUnits();
    Polygons walls;
    for (int k = 0; k < cfg.wall_count; k++)
    {
        Polygons centerline = offsetPolygons(outline, -(w / 2 + k * w));
        for (const Polygon& p : centerline.polys)
            walls.add(p);
        if (centerline.empty())
            break;
    }
    coord_t fit_inset = cfg.wall_count * w + w / 2;
    Polygons fit_area = offsetPolygons(outline, -fit_inset);
    LayerPlan plan;
    if (fit_area.empty() && walls.empty())
    {
        plan.z = curve.z;
        plan.line_width = w;
        return plan;
    }
    std::vector<Polyline> loops = fit_area.empty() ? std::vector<Polyline>{} : fitToArea(curve, fit_area);
    if (loops.empty() && walls.empty())
    {
        plan.z = curve.z;
        plan.line_width = w;
        return plan;
    }
    if (walls.empty())
    {
        plan.z = curve.z;
        plan.line_width = w;
        plan.infill_loops = loops;
        for (const Polyline& l : loops)
            plan.input_length += l.length();
        plan.toolpath = connectPolygons(std::move(loops), w, BridgeCriteria::LowCurvature, &fit_area, &plan.bridges);
        return plan;
    }
    return connectToWalls(std::move(loops), walls, curve.z, w, cfg.keep_outer_separate);
}

/*! stats.json payload for a run. */
inline nlohmann::json runStats(const PipelineResult& result, const RunConfig& cfg)
{
    nlohmann::json j;
    j["line_width_mm"] = cfg.profile.line_width;
    j["layer_height_mm"] = cfg.profile.layer_height;
    j["l_init_mm"] = toMm(result.forest.l_init);
    j["max_depth"] = result.forest.max_depth;
    nlohmann::json depths = nlohmann::json::object();
    for (const auto& [depth, count] : result.grading.leaves_per_depth)
        depths[std::to_string(depth)] = count;
    j["leaves_per_depth"] = depths;
    j["total_target_mass_mm3"] = result.grading.total_target_mass;
    j["total_realized_mass_mm3"] = result.grading.total_realized_mass;
    j["dropped_error_mm3"] = result.grading.dropped_error;
    j["dither_subdivisions"] = result.grading.subdivisions;
    j["surface_flips"] = result.surface.stats.flips;
    j["surface_landings"] = result.surface.stats.landings;
    j["surface_residuals"] = result.surface.stats.residuals.size();
    size_t bridges = 0;
    double toolpath_len = 0;
    for (const LayerPlan& p : result.plans)
    {
        bridges += p.bridges.size();
        toolpath_len += p.toolpath.length() / kUnitsPerMm + p.outer_wall.length() / kUnitsPerMm;
    }
    j["bridges"] = bridges;
    j["toolpath_length_mm"] = toolpath_len;
    j["layers"] = result.plans.size();
    return j;
}

/*! Forest dump for visualization and regression snapshots. */
inline nlohmann::json dumpForest(const SubdivisionForest& forest)
{
    nlohmann::json cells = nlohmann::json::array();
    for (cell_idx i = 0; i < static_cast<cell_idx>(forest.cells.size()); i++)
    {
        const PrismCell& c = forest.cell(i);
        nlohmann::json jc;
        jc["id"] = i;
        jc["kind"] = c.kind().str();
        jc["depth"] = c.depth;
        jc["leaf"] = c.isLeaf();
        jc["triangle"] = {{toMm(c.straight_corner.x), toMm(c.straight_corner.y)},
                          {toMm(c.right_corner.x), toMm(c.right_corner.y)},
                          {toMm(c.left_corner.x), toMm(c.left_corner.y)}};
        jc["z"] = {toMm(c.z0), toMm(c.z1)};
        if (!c.isLeaf())
        {
            nlohmann::json ch = nlohmann::json::array();
            for (cell_idx k : c.children)
                if (k != kNoCell)
                    ch.push_back(k);
            jc["children"] = ch;
        }
        else
        {
            jc["links"] = {{"left", c.links[kSideLeft]},
                           {"right", c.links[kSideRight]},
                           {"up", c.links[kSideUp]},
                           {"down", c.links[kSideDown]}};
        }
        cells.push_back(std::move(jc));
    }
    nlohmann::json j;
    j["l_init_mm"] = toMm(forest.l_init);
    j["line_width_mm"] = toMm(forest.line_width);
    j["cells"] = std::move(cells);
    return j;
}

/*! Run layer planning for all layers, optionally in parallel. */
inline void planAllLayers(PipelineResult& result, const std::vector<SlicedLayer>& layers, const RunConfig& cfg)
{
    std::set<coord_t> seams = bandBoundaries(result.forest);
    result.raw_curves.resize(layers.size());
    result.plans.resize(layers.size());
    // trace sequentially: the start hint chains across layers
    Point2 hint = result.forest.origin.flatten();
    for (size_t i = 0; i < layers.size(); i++)
    {
        coord_t z = nudgeOffSeams(seams, layers[i].z + cfg.profile.layerHeightUnits() / 2);
        LayerCurve traced = traceLayer(result.forest, result.surface, z, hint);
        hint = traced.points.front();
        traced.z = layers[i].z;
        result.raw_curves[i] = std::move(traced);
    }
    auto worker = [&](size_t i) {
        LayerCurve curve = clampEndpoints(result.raw_curves[i], result.surface);
        curve = detourSharpTurns(curve, result.surface);
        result.plans[i] = planLayer(curve, layers[i].outline, cfg);
    };
    if (cfg.threads <= 1)
    {
        for (size_t i = 0; i < layers.size(); i++)
            worker(i);
    }
    else
    {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int t = 0; t < cfg.threads; t++)
            pool.emplace_back([&]() {
                while (true)
                {
                    size_t i = next.fetch_add(1);
                    if (i >= layers.size())
                        return;
                    worker(i);
                }
            });
        for (std::thread& t : pool)
            t.join();
    }
}

/*!
 * The full pipeline for one model and density specification; writes gcode,
 * per-layer SVGs and stats.json into the output directory.
 */
inline PipelineResult runSlice(const RunConfig& cfg, const DensityField& field,
                               const std::vector<SlicedLayer>& layers)
{
    if (layers.empty())
        throw std::runtime_error("no layers to slice");
    Point3 bb_min{INT64_MAX, INT64_MAX, layers.front().z};
    Point3 bb_max{INT64_MIN, INT64_MIN,
                  layers.back().z + cfg.profile.layerHeightUnits()};
    for (const SlicedLayer& l : layers)
        for (const Polygon& p : l.outline.polys)
            for (const Point2& pt : p.points)
            {
                bb_min.x = std::min(bb_min.x, pt.x);
                bb_min.y = std::min(bb_min.y, pt.y);
                bb_max.x = std::max(bb_max.x, pt.x);
                bb_max.y = std::max(bb_max.y, pt.y);
            }
    const coord_t w = cfg.profile.lineWidthUnits();
    auto [origin, side] = startingCube(bb_min, bb_max, w, cfg.l_init_override);
    int max_depth = cfg.max_depth_override >= 0 ? cfg.max_depth_override
                                                : SubdivisionForest::defaultMaxDepth(side, w);

    DensityField spec = field;
    if (!cfg.compensation_path.empty())
    {
        std::ifstream in(cfg.compensation_path);
        if (!in)
            throw std::runtime_error("cannot open compensation table: " + cfg.compensation_path);
        std::vector<std::pair<double, double>> samples;
        double a, b;
        char comma;
        while (in >> a >> comma >> b)
            samples.push_back({a, b});
        applyCompensation(spec, CompensationCurve::fit(std::move(samples)));
    }

    PipelineResult result;
    result.forest = SubdivisionForest(side, w, max_depth, origin);
    buildLowerBound(result.forest, spec);
    result.grading = dither(result.forest, spec);
    if (cfg.skin_min_level > 0)
    {
        std::vector<SkinArea> skins = computeTopSkins(layers, cfg.top_skin_mm, cfg.profile.layerHeightUnits());
        enforceSkinSupport(result.forest, skins, std::min(cfg.skin_min_level, max_depth));
        // re-audit mass accounting after forced subdivisions
        result.grading.total_realized_mass = 0;
        result.forest.forEachLeaf([&](cell_idx i) {
            result.grading.total_realized_mass += result.forest.currentMass(result.forest.cell(i));
        });
    }
    result.surface = buildSurface(result.forest);
    planAllLayers(result, layers, cfg);
    return result;
}

inline void writeOutputs(const PipelineResult& result, const RunConfig& cfg)
{
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "toolpath.gcode", std::ios::binary);
        emitGcode(os, result.plans, cfg.profile);
    }
    for (size_t i = 0; i < result.plans.size(); i++)
    {
        char name[32];
        std::snprintf(name, sizeof(name), "layer_%05zu.svg", i);
        std::ofstream os(fs::path(cfg.output_dir) / name, std::ios::binary);
        emitSvg(os, result.plans[i]);
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "stats.json", std::ios::binary);
        os << runStats(result, cfg).dump(2) << '\n';
    }
}

/*!
 * Self-measurement of the simplified-density discrepancy: run homogeneous
 * cubes over a range of simplified densities, record realized density, fit
 * the monotone compensation curve.
 */
inline CompensationCurve calibrateCompensation(coord_t l_init, const PrintProfile& profile,
                                               const std::vector<double>& samples, int threads = 1,
                                               std::vector<std::pair<double, double>>* raw_out = nullptr)
{
    const coord_t w = profile.lineWidthUnits();
    std::vector<std::pair<double, double>> measured(samples.size());
    auto runOne = [&](size_t i) {
        double rho = samples[i];
        if (rho <= 0)
        {
            measured[i] = {0.0, 0.0};
            return;
        }
        DensityField field = testspecs::homogeneous(rho, toMm(l_init), 8);
        RunConfig cfg;
        cfg.profile = profile;
        cfg.l_init_override = l_init;
        cfg.wall_count = 0;
        std::vector<SlicedLayer> layers;
        Polygon square;
        square.points = {{0, 0}, {l_init, 0}, {l_init, l_init}, {0, l_init}};
        for (coord_t z = 0; z + profile.layerHeightUnits() <= l_init; z += profile.layerHeightUnits())
        {
            SlicedLayer layer;
            layer.z = z;
            layer.outline.add(square);
            layers.push_back(std::move(layer));
        }
        PipelineResult r = runSlice(cfg, field, layers);
        BoxRegion cube{0, 0, 0, toMm(l_init), toMm(l_init), toMm(l_init)};
        measured[i] = {rho, realizedDensity(r.plans, cube, profile.layer_height)};
    };
    if (threads <= 1)
    {
        for (size_t i = 0; i < samples.size(); i++)
            runOne(i);
    }
    else
    {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int t = 0; t < threads; t++)
            pool.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1))
                    runOne(i);
            });
        for (std::thread& t : pool)
            t.join();
    }
    if (raw_out)
        *raw_out = measured;
    return CompensationCurve::fit(measured);
}

} // namespace crossfoam
