// sparseflex command line: voxelize, extract, fit, cull, bench, metrics.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparseflex/bench.hpp"
#include "sparseflex/flexicubes.hpp"
#include "sparseflex/frustum.hpp"
#include "sparseflex/meshio.hpp"
#include "sparseflex/metrics.hpp"
#include "sparseflex/optimize.hpp"
#include "sparseflex/parallel.hpp"
#include "sparseflex/shapes.hpp"

using namespace sparseflex;
using json = nlohmann::json;

namespace
{
    enum Exit
    {
        kOk = 0,
        kOther = 1,
        kUsage = 2,
        kIo = 3,
        kValidation = 4,
        kNumerical = 5,
    };

    struct UsageError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    int verbosity = 1;

    void info(const std::string & msg)
    {
        if (verbosity >= 1) std::cerr << msg << "\n";
    }

    std::string read_text(const std::string & path)
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write_text(const std::string & path, const std::string & text)
    {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out << text;
        if (!out) throw IoError("failed writing " + path);
    }

    // Settings file: {"seed", "threads", "verbosity", and one object per command}.
    json load_settings(const std::string & path)
    {
        json j;
        try
        {
            j = json::parse(read_text(path));
        }
        catch (const json::parse_error & e)
        {
            throw ParseError(path + ": " + e.what(), e.byte);
        }
        if (!j.is_object()) throw std::invalid_argument(path + ": top level must be an object");
        static const std::map<std::string, std::vector<std::string>> allowed{
            {"voxelize", {"mesh", "res", "samples", "seed", "out"}},
            {"extract", {"grid", "sdf", "camera", "alpha", "out"}},
            {"fit", {}},  // FitConfig, checked by parse_fit_config
            {"cull", {"grid", "camera", "alpha", "containment", "sdf", "out"}},
            {"bench", {"shape", "res", "alphas", "repeats", "image_size", "dense_budget_mb", "dense", "out", "timing"}},
            {"metrics", {"a", "b", "samples", "seed"}},
        };
        for (const auto & [key, value] : j.items())
        {
            if (key == "seed" || key == "threads" || key == "verbosity")
            {
                if (!value.is_number_integer()) throw std::invalid_argument(path + ": '" + key + "' must be an integer");
                continue;
            }
            const auto it = allowed.find(key);
            if (it == allowed.end()) throw std::invalid_argument(path + ": unknown key '" + key + "'");
            if (!value.is_object()) throw std::invalid_argument(path + ": section '" + key + "' must be an object");
            if (key == "fit") continue;
            for (const auto & [k, v] : value.items())
                if (std::find(it->second.begin(), it->second.end(), k) == it->second.end())
                    throw std::invalid_argument(path + ": unknown key '" + key + "." + k + "'");
        }
        return j;
    }

    // A flag given on the command line wins over the settings file, which wins over the default.
    template <typename T>
    void merge(T & value, const CLI::Option * opt, const json & section, const char * key)
    {
        if (opt->count() > 0 || !section.contains(key)) return;
        try
        {
            value = section.at(key).get<T>();
        }
        catch (const json::exception &)
        {
            throw std::invalid_argument(std::string("settings: bad value for '") + key + "'");
        }
    }

    template <typename T>
    T required(const T & value, const CLI::Option * opt, const json & section, const char * key)
    {
        if (opt->count() == 0 && !section.contains(key)) throw UsageError(std::string("--") + key + " is required");
        return value;
    }

    // Analytic shape id, or a params file for the grid.
    FlexParams params_for(const SparseGrid & grid, const std::string & sdf)
    {
        if (sdf == "sphere" || sdf == "plane" || sdf == "hollow") return sample_params(grid, sdf::by_name(sdf));
        return load_params(sdf, grid);
    }

    Containment parse_containment(const std::string & s)
    {
        if (s == "center") return Containment::Center;
        if (s == "conservative") return Containment::Conservative;
        throw UsageError("containment must be center or conservative");
    }

    std::string frustum_json(const FrustumResult & fr, std::size_t total)
    {
        json j;
        j["achieved_ratio"] = fr.achieved_ratio;
        j["active_voxels"] = fr.active.size();
        j["total_voxels"] = total;
        j["near"] = fr.near;
        j["far"] = fr.far;
        j["iterations"] = fr.iterations;
        j["reached"] = fr.reached;
        return j.dump(2);
    }

    template <typename T>
    std::vector<T> split_list(const std::string & text)
    {
        std::vector<T> out;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ','))
        {
            std::istringstream is(item);
            T v;
            if (!(is >> v) || !(is >> std::ws).eof()) throw UsageError("bad list entry '" + item + "'");
            out.push_back(v);
        }
        if (out.empty()) throw UsageError("empty list");
        return out;
    }
}  // namespace

int main(int argc, char ** argv)
{
    CLI::App app{"SparseFlex: sparse differentiable isosurfaces with frustum-sectional extraction"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 1;
    std::string settings_path;
    auto * seed_opt = app.add_option("--seed", seed, "RNG seed")->capture_default_str();
    auto * threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256))->capture_default_str();
    auto * verb_opt = app.add_option("--verbosity", verbosity, "0 quiet, 1 summary, 2 detail")->check(CLI::Range(0, 2));
    app.add_option("--config", settings_path, "settings file (JSON, one section per command); flags override it");

    // voxelize
    auto * vox = app.add_subcommand("voxelize", "normalize a mesh, sample its surface and voxelize the samples");
    std::string vox_mesh, vox_out;
    std::uint32_t vox_res = 0;
    std::size_t vox_samples = 500000;
    std::uint64_t vox_seed = 0;
    auto * vox_mesh_opt = vox->add_option("--mesh", vox_mesh, "input OBJ or PLY");
    auto * vox_res_opt = vox->add_option("--res", vox_res, "grid resolution N_r")->check(CLI::Range(1u, kMaxResolution));
    auto * vox_samples_opt = vox->add_option("--samples", vox_samples, "surface samples")->check(CLI::PositiveNumber);
    auto * vox_seed_opt = vox->add_option("--seed", vox_seed, "sampling seed (defaults to the global seed)");
    auto * vox_out_opt = vox->add_option("--out", vox_out, "grid file to write");

    // extract
    auto * ext = app.add_subcommand("extract", "extract a mesh from a grid, fully or inside a camera frustum");
    std::string ext_grid, ext_sdf = "sphere", ext_camera, ext_out;
    double ext_alpha = 1.0;
    auto * ext_grid_opt = ext->add_option("--grid", ext_grid, "grid file");
    auto * ext_sdf_opt = ext->add_option("--sdf", ext_sdf, "sphere | plane | hollow | params file")->capture_default_str();
    auto * ext_camera_opt = ext->add_option("--camera", ext_camera, "camera JSON; enables sectional extraction");
    auto * ext_alpha_opt = ext->add_option("--alpha", ext_alpha, "visibility ratio")->check(CLI::Range(0.0, 1.0));
    auto * ext_out_opt = ext->add_option("--out", ext_out, "mesh to write (OBJ or PLY)");

    // fit
    auto * fitc = app.add_subcommand("fit", "fit SparseFlex parameters to a target mesh");
    std::string fit_target, fit_config, fit_out, fit_report, fit_params;
    bool fit_normalize = false;
    fitc->add_option("--target", fit_target, "target mesh")->required();
    fitc->add_option("--config", fit_config, "fit config JSON (default: the settings file's fit section)");
    fitc->add_option("--out", fit_out, "fitted mesh")->required();
    fitc->add_option("--report", fit_report, "report JSON")->required();
    fitc->add_option("--params", fit_params, "also write the fitted parameters");
    fitc->add_flag("--normalize", fit_normalize, "normalize the target into the domain first");

    // cull
    auto * cull = app.add_subcommand("cull", "adapt a camera frustum to a visibility ratio and report the active set");
    std::string cull_grid, cull_camera, cull_out, cull_sdf = "sphere", cull_containment = "center";
    double cull_alpha = 1.0;
    auto * cull_grid_opt = cull->add_option("--grid", cull_grid, "grid file");
    auto * cull_camera_opt = cull->add_option("--camera", cull_camera, "camera JSON");
    auto * cull_alpha_opt = cull->add_option("--alpha", cull_alpha, "visibility ratio")->check(CLI::Range(0.0, 1.0));
    auto * cull_cont_opt = cull->add_option("--containment", cull_containment, "center | conservative")->capture_default_str();
    auto * cull_sdf_opt = cull->add_option("--sdf", cull_sdf, "parameters for --out: sphere | plane | hollow | params file");
    auto * cull_out_opt = cull->add_option("--out", cull_out, "write the sectional mesh");

    // bench
    auto * bench = app.add_subcommand("bench", "time and byte-account dense, sparse and sectional extraction");
    BenchOptions bopt;
    std::string bench_res = "64,128,256", bench_alphas = "0.1,0.3,1.0", bench_out;
    std::size_t bench_budget_mb = bopt.dense_budget >> 20;
    bool bench_no_dense = false, bench_no_timing = false;
    auto * b_shape_opt = bench->add_option("--shape", bopt.shape, "sphere | plane | hollow")->capture_default_str();
    auto * b_res_opt = bench->add_option("--res", bench_res, "comma-separated resolutions")->capture_default_str();
    auto * b_alpha_opt = bench->add_option("--alphas", bench_alphas, "comma-separated visibility ratios")->capture_default_str();
    auto * b_rep_opt = bench->add_option("--repeats", bopt.repeats, "timed repeats per row")->check(CLI::PositiveNumber);
    auto * b_img_opt = bench->add_option("--image-size", bopt.image_size, "render size")->check(CLI::PositiveNumber);
    auto * b_budget_opt = bench->add_option("--dense-budget-mb", bench_budget_mb, "dense rows above this are marked OOM");
    auto * b_nodense_opt = bench->add_flag("--no-dense", bench_no_dense, "skip dense rows");
    auto * b_notime_opt = bench->add_flag("--no-timing", bench_no_timing, "omit timing columns (for comparisons)");
    auto * b_out_opt = bench->add_option("--out", bench_out, "CSV file (default stdout)");

    // metrics
    auto * met = app.add_subcommand("metrics", "Chamfer distance and F-scores between two meshes");
    std::string met_a, met_b;
    std::size_t met_samples = 100000;
    std::uint64_t met_seed = 0;
    auto * met_a_opt = met->add_option("--a", met_a, "first mesh");
    auto * met_b_opt = met->add_option("--b", met_b, "second mesh");
    auto * met_samples_opt = met->add_option("--samples", met_samples, "samples per mesh")->check(CLI::PositiveNumber);
    auto * met_seed_opt = met->add_option("--seed", met_seed, "sampling seed (defaults to the global seed)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp & e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp & e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError & e)
    {
        app.exit(e);
        return kUsage;
    }

    try
    {
        const json settings = settings_path.empty() ? json::object() : load_settings(settings_path);
        auto section = [&](const char * name) { return settings.contains(name) ? settings.at(name) : json::object(); };
        merge(seed, seed_opt, settings, "seed");
        merge(threads, threads_opt, settings, "threads");
        merge(verbosity, verb_opt, settings, "verbosity");
        if (threads < 1) throw UsageError("threads must be >= 1");
        set_num_threads(threads);

        if (*vox)
        {
            const json s = section("voxelize");
            if (vox_seed_opt->count() == 0) vox_seed = seed;
            merge(vox_mesh, vox_mesh_opt, s, "mesh");
            merge(vox_res, vox_res_opt, s, "res");
            merge(vox_samples, vox_samples_opt, s, "samples");
            merge(vox_seed, vox_seed_opt, s, "seed");
            merge(vox_out, vox_out_opt, s, "out");
            required(vox_mesh, vox_mesh_opt, s, "mesh");
            required(vox_out, vox_out_opt, s, "out");
            if (vox_res < 1 || vox_res > kMaxResolution) throw UsageError("--res must be in [1, " + std::to_string(kMaxResolution) + "]");
            if (vox_samples < 1) throw UsageError("--samples must be positive");

            const auto [mesh, transform] = normalize_mesh(load_mesh(vox_mesh));
            const PointCloud pc = sample_surface(mesh, vox_samples, vox_seed);
            const SparseGrid grid = voxelize_points(pc, vox_res);
            save_grid(vox_out, grid);
            json j;
            j["voxels"] = grid.num_voxels();
            j["corners"] = grid.num_corners();
            j["resolution"] = vox_res;
            j["normalize"] = {{"center", {transform.center.x(), transform.center.y(), transform.center.z()}},
                              {"scale", transform.scale}};
            std::cout << j.dump(2) << "\n";
        }
        else if (*ext)
        {
            const json s = section("extract");
            merge(ext_grid, ext_grid_opt, s, "grid");
            merge(ext_sdf, ext_sdf_opt, s, "sdf");
            merge(ext_camera, ext_camera_opt, s, "camera");
            merge(ext_alpha, ext_alpha_opt, s, "alpha");
            merge(ext_out, ext_out_opt, s, "out");
            required(ext_grid, ext_grid_opt, s, "grid");
            required(ext_out, ext_out_opt, s, "out");
            if (!(ext_alpha > 0.0 && ext_alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");

            const SparseGrid grid = load_grid(ext_grid);
            const FlexParams params = params_for(grid, ext_sdf);
            TriangleMesh mesh;
            if (ext_camera.empty())
                mesh = extract(grid, params);
            else
            {
                const Camera cam = parse_camera(read_text(ext_camera));
                const auto fr = adapt_frustum(grid, cam, ext_alpha);
                mesh = extract(grid, params, fr.active);
                info(frustum_json(fr, grid.num_voxels()));
            }
            save_mesh(mesh, ext_out);
            info("extract: " + std::to_string(mesh.num_vertices()) + " vertices, " + std::to_string(mesh.num_faces()) + " faces");
        }
        else if (*fitc)
        {
            FitConfig cfg;
            if (!fit_config.empty())
                cfg = load_fit_config(fit_config);
            else if (settings.contains("fit"))
                cfg = parse_fit_config(settings.at("fit").dump());
            if (seed_opt->count() > 0) cfg.seed = seed;

            TriangleMesh target = load_mesh(fit_target);
            if (fit_normalize) target = normalize_mesh(target).first;
            const FitResult res = fit(target, cfg);
            save_mesh(res.mesh, fit_out);
            write_text(fit_report, res.report.to_json() + "\n");
            if (!fit_params.empty()) save_params(fit_params, res.params);
            info("fit: cd_e4 " + std::to_string(res.report.initial.cd_e4) + " -> " + std::to_string(res.report.final.cd_e4)
                 + ", f1(0.01) " + std::to_string(res.report.final.f1_01) + ", " + std::to_string(res.report.wall_seconds) + " s");
            if (verbosity >= 2)
                for (std::size_t i = 0; i < res.report.loss_trace.size(); ++i)
                    std::cerr << "  it " << i << " loss " << res.report.loss_trace[i] << "\n";
        }
        else if (*cull)
        {
            const json s = section("cull");
            merge(cull_grid, cull_grid_opt, s, "grid");
            merge(cull_camera, cull_camera_opt, s, "camera");
            merge(cull_alpha, cull_alpha_opt, s, "alpha");
            merge(cull_containment, cull_cont_opt, s, "containment");
            merge(cull_sdf, cull_sdf_opt, s, "sdf");
            merge(cull_out, cull_out_opt, s, "out");
            required(cull_grid, cull_grid_opt, s, "grid");
            required(cull_camera, cull_camera_opt, s, "camera");
            required(cull_alpha, cull_alpha_opt, s, "alpha");
            if (!(cull_alpha > 0.0 && cull_alpha <= 1.0)) throw UsageError("--alpha must lie in (0, 1]");

            const SparseGrid grid = load_grid(cull_grid);
            const Camera cam = parse_camera(read_text(cull_camera));
            const auto fr = adapt_frustum(grid, cam, cull_alpha, {0.02, 32, parse_containment(cull_containment)});
            std::cout << frustum_json(fr, grid.num_voxels()) << "\n";
            if (!cull_out.empty()) save_mesh(extract(grid, params_for(grid, cull_sdf), fr.active), cull_out);
        }
        else if (*bench)
        {
            const json s = section("bench");
            bool timing = !bench_no_timing, dense = !bench_no_dense;
            merge(bopt.shape, b_shape_opt, s, "shape");
            merge(bench_res, b_res_opt, s, "res");
            merge(bench_alphas, b_alpha_opt, s, "alphas");
            merge(bopt.repeats, b_rep_opt, s, "repeats");
            merge(bopt.image_size, b_img_opt, s, "image_size");
            merge(bench_budget_mb, b_budget_opt, s, "dense_budget_mb");
            merge(dense, b_nodense_opt, s, "dense");
            merge(timing, b_notime_opt, s, "timing");
            merge(bench_out, b_out_opt, s, "out");
            bopt.resolutions = split_list<std::uint32_t>(bench_res);
            bopt.alphas = split_list<double>(bench_alphas);
            bopt.dense_budget = bench_budget_mb << 20;
            bopt.dense = dense;
            bopt.seed = seed;

            const BenchReport report = run_bench(bopt);
            const std::string csv = report.to_csv(timing);
            if (bench_out.empty())
                std::cout << csv;
            else
                write_text(bench_out, csv);
        }
        else if (*met)
        {
            const json s = section("metrics");
            if (met_seed_opt->count() == 0) met_seed = seed;
            merge(met_a, met_a_opt, s, "a");
            merge(met_b, met_b_opt, s, "b");
            merge(met_samples, met_samples_opt, s, "samples");
            merge(met_seed, met_seed_opt, s, "seed");
            required(met_a, met_a_opt, s, "a");
            required(met_b, met_b_opt, s, "b");
            const MetricReport r = mesh_metrics(load_mesh(met_a), load_mesh(met_b), met_samples, met_seed);
            std::cout << r.to_json() << "\n";
        }
        return kOk;
    }
    catch (const UsageError & e)
    {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    }
    catch (const IoError & e)
    {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    }
    catch (const ParseError & e)
    {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    }
    catch (const NumericalError & e)
    {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kNumerical;
    }
    catch (const std::invalid_argument & e)
    {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    }
    catch (const std::out_of_range & e)
    {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kValidation;
    }
    catch (const std::exception & e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
}
