#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "crossfoam/pipeline.hpp"

namespace fs = std::filesystem;
using namespace crossfoam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStageFailure = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> expandGlob(const std::string& pattern)
{
    fs::path p(pattern);
    fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
    std::string name = p.filename().string();
    size_t star = name.find('*');
    std::vector<std::string> files;
    if (star == std::string::npos)
    {
        if (fs::is_directory(pattern))
        {
            for (const auto& e : fs::directory_iterator(pattern))
                if (e.is_regular_file())
                    files.push_back(e.path().string());
        }
        else
            files.push_back(pattern);
    }
    else
    {
        std::string prefix = name.substr(0, star);
        std::string suffix = name.substr(star + 1);
        if (!fs::is_directory(dir))
            throw std::runtime_error("no such directory: " + dir.string());
        for (const auto& e : fs::directory_iterator(dir))
        {
            std::string fn = e.path().filename().string();
            if (fn.size() >= prefix.size() + suffix.size() && fn.rfind(prefix, 0) == 0
                && fn.compare(fn.size() - suffix.size(), suffix.size(), suffix) == 0)
                files.push_back(e.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error("density stack pattern matched no files: " + pattern);
    return files;
}

struct Options
{
    RunConfig run;
    std::string density_glob;
    std::string spec_name; // procedural spec alternative
    double spec_value = 0.2;
    double cube_mm = 0;    // cube model side when no model file is given
};

void loadConfigFile(const std::string& path, Options& opt)
{
    std::ifstream in(path);
    if (!in)
        throw CLI::ValidationError("config", "cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        lineno++;
        size_t hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            continue;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r\"");
            size_t b = s.find_last_not_of(" \t\r\"");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            continue;
        if (key == "model") opt.run.model_path = value;
        else if (key == "density_glob") opt.density_glob = value;
        else if (key == "spec") opt.spec_name = value;
        else if (key == "spec_value") opt.spec_value = std::stod(value);
        else if (key == "cube") opt.cube_mm = std::stod(value);
        else if (key == "gray_zero") opt.run.gray_map.gray_at_zero = std::stod(value);
        else if (key == "gray_full") opt.run.gray_map.gray_at_full = std::stod(value);
        else if (key == "voxel_x") opt.run.voxel_x = std::stod(value);
        else if (key == "voxel_y") opt.run.voxel_y = std::stod(value);
        else if (key == "voxel_z") opt.run.voxel_z = std::stod(value);
        else if (key == "line_width") opt.run.profile.line_width = std::stod(value);
        else if (key == "layer_height") opt.run.profile.layer_height = std::stod(value);
        else if (key == "speed") opt.run.profile.speed = std::stod(value);
        else if (key == "filament_diameter") opt.run.profile.filament_diameter = std::stod(value);
        else if (key == "l_init") opt.run.l_init_override = fromMm(std::stod(value));
        else if (key == "max_depth") opt.run.max_depth_override = std::stoi(value);
        else if (key == "walls") opt.run.wall_count = std::stoi(value);
        else if (key == "keep_outer_separate") opt.run.keep_outer_separate = value == "true" || value == "1";
        else if (key == "skin_min_level") opt.run.skin_min_level = std::stoi(value);
        else if (key == "top_skin") opt.run.top_skin_mm = std::stod(value);
        else if (key == "compensation") opt.run.compensation_path = value;
        else if (key == "output") opt.run.output_dir = value;
        else if (key == "threads") opt.run.threads = std::stoi(value);
        else throw CLI::ValidationError("config", "unknown key '" + key + "' on line " + std::to_string(lineno));
    }
}

DensityField proceduralSpec(const std::string& name, double value, double side_mm)
{
    if (name == "homogeneous")
        return testspecs::homogeneous(value, side_mm);
    if (name == "gradient")
        return testspecs::diagonalGradient(0.10, 0.40, side_mm);
    if (name == "contrast")
        return testspecs::contrastPlane(0.10, 0.40, side_mm);
    if (name == "sphere")
        return testspecs::sphereShell(0.10, 0.40, side_mm);
    throw std::runtime_error("unknown spec '" + name + "' (use homogeneous|gradient|contrast|sphere)");
}

std::vector<SlicedLayer> cubeLayers(double side_mm, const PrintProfile& profile)
{
    coord_t side = fromMm(side_mm);
    coord_t lh = profile.layerHeightUnits();
    Polygon square;
    square.points = {{0, 0}, {side, 0}, {side, side}, {0, side}};
    std::vector<SlicedLayer> layers;
    for (coord_t z = 0; z + lh <= side; z += lh)
    {
        SlicedLayer layer;
        layer.z = z;
        layer.outline.add(square);
        layers.push_back(std::move(layer));
    }
    return layers;
}

struct ModelInput
{
    std::vector<SlicedLayer> layers;
    DensityField field;
};

ModelInput loadInputs(Options& opt)
{
    ModelInput input;
    PrintProfile& prof = opt.run.profile;
    if (!opt.run.model_path.empty())
    {
        fs::path p(opt.run.model_path);
        if (p.extension() == ".json")
            input.layers = loadLayerJson(opt.run.model_path);
        else
        {
            TriangleMesh mesh = loadStl(opt.run.model_path);
            input.layers = sliceMesh(mesh, prof.layerHeightUnits(), mesh.boundingBoxMin().z);
        }
    }
    else if (opt.cube_mm > 0)
    {
        input.layers = cubeLayers(opt.cube_mm, prof);
    }
    else
    {
        throw CLI::ValidationError("model", "either a model file or a cube size is required");
    }
    if (!opt.density_glob.empty())
    {
        opt.run.density_files = expandGlob(opt.density_glob);
        input.field = loadImageStack(opt.run.density_files, opt.run.gray_map, opt.run.voxel_x, opt.run.voxel_y,
                                     opt.run.voxel_z);
    }
    else if (!opt.spec_name.empty())
    {
        double side = opt.cube_mm;
        if (side <= 0)
        {
            Point3 lo{INT64_MAX, INT64_MAX, 0}, hi{INT64_MIN, INT64_MIN, 0};
            for (const SlicedLayer& l : input.layers)
                for (const Polygon& poly : l.outline.polys)
                    for (const Point2& pt : poly.points)
                    {
                        lo.x = std::min(lo.x, pt.x); lo.y = std::min(lo.y, pt.y);
                        hi.x = std::max(hi.x, pt.x); hi.y = std::max(hi.y, pt.y);
                    }
            side = toMm(std::max(hi.x - lo.x, hi.y - lo.y));
        }
        input.field = proceduralSpec(opt.spec_name, opt.spec_value, side);
    }
    else
    {
        throw CLI::ValidationError("density", "either --density or --spec is required");
    }
    return input;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"graded-density space-filling foam infill generator"};
    app.require_subcommand(1);
    Options opt;
    std::string config_path;

    auto addCommon = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value configuration file")
            ->each([&](const std::string& path) { loadConfigFile(path, opt); });
        cmd->add_option("--model", opt.run.model_path, "input model (.stl or layer .json)");
        cmd->add_option("--cube", opt.cube_mm, "use a cube of this side length (mm) as the model");
        cmd->add_option("--density", opt.density_glob, "gray-scale image stack glob (.png/.pgm)");
        cmd->add_option("--spec", opt.spec_name, "procedural spec: homogeneous|gradient|contrast|sphere");
        cmd->add_option("--spec-value", opt.spec_value, "density for the homogeneous spec");
        cmd->add_option("--gray-zero", opt.run.gray_map.gray_at_zero, "gray value mapped to 0% density");
        cmd->add_option("--gray-full", opt.run.gray_map.gray_at_full, "gray value mapped to 100% density");
        cmd->add_option("--voxel-x", opt.run.voxel_x, "voxel size x (mm)");
        cmd->add_option("--voxel-y", opt.run.voxel_y, "voxel size y (mm)");
        cmd->add_option("--voxel-z", opt.run.voxel_z, "voxel size z (mm)");
        cmd->add_option("--line-width", opt.run.profile.line_width, "extrusion width (mm)");
        cmd->add_option("--layer-height", opt.run.profile.layer_height, "layer height (mm)");
        cmd->add_option("--walls", opt.run.wall_count, "number of perimeter walls");
        cmd->add_flag("--keep-outer-separate", opt.run.keep_outer_separate,
                      "keep the outer wall out of the merged toolpath");
        cmd->add_option("--skin-min-level", opt.run.skin_min_level, "minimal level under top skin");
        cmd->add_option("--top-skin", opt.run.top_skin_mm, "top skin thickness (mm)");
        cmd->add_option("--l-init", [&](const std::vector<std::string>& v) {
                opt.run.l_init_override = fromMm(std::stod(v[0]));
                return true;
            }, "starting cube side override (mm)");
        cmd->add_option("--max-depth", opt.run.max_depth_override, "maximum subdivision depth");
        cmd->add_option("--compensation", opt.run.compensation_path, "compensation table csv");
        cmd->add_option("-o,--output", opt.run.output_dir, "output directory");
        cmd->add_option("--threads", opt.run.threads, "worker threads for per-layer stages");
    };

    CLI::App* slice = app.add_subcommand("slice", "generate toolpaths for a model and density spec");
    addCommon(slice);
    CLI::App* calibrate = app.add_subcommand("calibrate", "measure the simplified-density compensation curve");
    addCommon(calibrate);
    double cal_lo = 0.01, cal_hi = 0.80;
    int cal_n = 17;
    calibrate->add_option("--from", cal_lo, "lowest simplified density");
    calibrate->add_option("--to", cal_hi, "highest simplified density");
    calibrate->add_option("--samples", cal_n, "number of samples");
    CLI::App* accuracy = app.add_subcommand("accuracy", "local-error curves for the standard test specs");
    addCommon(accuracy);
    std::vector<double> kernel_mults{4, 8, 16, 32, 64};
    accuracy->add_option("--kernels", kernel_mults, "kernel sizes in line widths");
    CLI::App* dump = app.add_subcommand("dump-forest", "grade a forest and dump it as json");
    addCommon(dump);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try
    {
        fs::create_directories(opt.run.output_dir);
        if (slice->parsed())
        {
            ModelInput input = loadInputs(opt);
            PipelineResult result = runSlice(opt.run, input.field, input.layers);
            writeOutputs(result, opt.run);
            std::cout << "layers: " << result.plans.size() << ", leaves: " << result.forest.leafCount()
                      << ", toolpath written to " << opt.run.output_dir << "\n";
        }
        else if (calibrate->parsed())
        {
            coord_t side = opt.run.l_init_override;
            if (side == 0)
                side = fromMm(opt.cube_mm > 0 ? opt.cube_mm : toMm(32 * opt.run.profile.lineWidthUnits()));
            std::vector<double> samples;
            for (int i = 0; i < cal_n; i++)
                samples.push_back(cal_lo + (cal_hi - cal_lo) * i / (cal_n - 1));
            std::vector<std::pair<double, double>> raw;
            CompensationCurve curve =
                calibrateCompensation(side, opt.run.profile, samples, opt.run.threads, &raw);
            std::ofstream os(fs::path(opt.run.output_dir) / "compensation.csv", std::ios::binary);
            for (auto& [s, r] : raw)
                os << s << "," << r << "\n";
            for (const std::string& wmsg : curve.warnings)
                std::cerr << "warning: " << wmsg << "\n";
            std::cout << "compensation table written to " << opt.run.output_dir << "/compensation.csv\n";
        }
        else if (accuracy->parsed())
        {
            double side = opt.cube_mm > 0 ? opt.cube_mm : toMm(64 * opt.run.profile.lineWidthUnits());
            opt.cube_mm = side;
            double w = opt.run.profile.line_width;
            std::vector<std::pair<std::string, DensityField>> specs;
            specs.push_back({"homogeneous20", testspecs::homogeneous(0.20, side)});
            specs.push_back({"homogeneous40", testspecs::homogeneous(0.40, side)});
            specs.push_back({"gradient", testspecs::diagonalGradient(0.10, 0.40, side)});
            specs.push_back({"contrast", testspecs::contrastPlane(0.10, 0.40, side)});
            specs.push_back({"sphere", testspecs::sphereShell(0.10, 0.40, side)});
            std::vector<SlicedLayer> layers = cubeLayers(side, opt.run.profile);
            nlohmann::json out;
            std::ofstream csv(fs::path(opt.run.output_dir) / "accuracy.csv", std::ios::binary);
            csv << "spec,kernel_mm,mean_abs_error\n";
            for (auto& [name, field] : specs)
            {
                RunConfig cfg = opt.run;
                cfg.l_init_override = fromMm(side);
                cfg.wall_count = 0;
                PipelineResult r = runSlice(cfg, field, layers);
                BoxRegion cube{0, 0, 0, side, side, side};
                std::vector<double> kernels;
                for (double m : kernel_mults)
                    kernels.push_back(m * w);
                auto curve = localErrorCurve(field, r.plans, cube, kernels, opt.run.profile.layer_height);
                for (auto& [k, e] : curve)
                {
                    csv << name << ',' << k << ',' << e << '\n';
                    out[name][std::to_string(k)] = e;
                }
            }
            std::ofstream os(fs::path(opt.run.output_dir) / "stats.json", std::ios::binary);
            os << out.dump(2) << '\n';
            std::cout << "accuracy curves written to " << opt.run.output_dir << "\n";
        }
        else if (dump->parsed())
        {
            ModelInput input = loadInputs(opt);
            Point3 bb_min{0, 0, input.layers.front().z};
            Point3 bb_max{0, 0, input.layers.back().z + opt.run.profile.layerHeightUnits()};
            bb_min.x = bb_min.y = INT64_MAX;
            bb_max.x = bb_max.y = INT64_MIN;
            for (const SlicedLayer& l : input.layers)
                for (const Polygon& poly : l.outline.polys)
                    for (const Point2& pt : poly.points)
                    {
                        bb_min.x = std::min(bb_min.x, pt.x); bb_min.y = std::min(bb_min.y, pt.y);
                        bb_max.x = std::max(bb_max.x, pt.x); bb_max.y = std::max(bb_max.y, pt.y);
                    }
            const coord_t w = opt.run.profile.lineWidthUnits();
            auto [origin, side] = startingCube(bb_min, bb_max, w, opt.run.l_init_override);
            int max_depth = opt.run.max_depth_override >= 0 ? opt.run.max_depth_override
                                                            : SubdivisionForest::defaultMaxDepth(side, w);
            PipelineResult r = buildStructure(input.field, side, w, max_depth, origin);
            std::ofstream os(fs::path(opt.run.output_dir) / "forest.json", std::ios::binary);
            os << dumpForest(r.forest).dump() << '\n';
            std::cout << "forest with " << r.forest.leafCount() << " leaves written to " << opt.run.output_dir
                      << "/forest.json\n";
        }
    }
    catch (const CLI::ValidationError& e)
    {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    }
    return kExitOk;
}
