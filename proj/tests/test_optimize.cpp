#include <doctest.h>

#include <cmath>

#include "sparseflex/meshio.hpp"
#include "sparseflex/optimize.hpp"
#include "sparseflex/types.hpp"

using namespace sparseflex;

TEST_SUITE("optimize")
{
    TEST_CASE("init_params sources")
    {
        const auto grid = sign_change_grid(sdf::by_name("sphere"), 16);

        InitConfig c;
        c.source = InitSource::Constant;
        const auto p = init_params(grid, c, 0);
        for (double s : p.sdf) CHECK(s == 0.5);
        CHECK(extract(grid, p).empty());

        c.source = InitSource::Random;
        c.noise = 0.3;
        const auto r1 = init_params(grid, c, 11), r2 = init_params(grid, c, 11), r3 = init_params(grid, c, 12);
        CHECK(r1 == r2);
        CHECK_FALSE(r1 == r3);
        for (double s : r1.sdf) CHECK(std::abs(s) <= 0.3);
        for (const auto & d : r1.deform) CHECK(d == Vec3::Zero());
        for (const auto & a : r1.alpha)
            for (double w : a) CHECK(w == 1.0);
        for (const auto & b : r1.beta)
            for (double w : b) CHECK(w == 1.0);
    }

    TEST_CASE("analytic sphere init at N_r=16 is close to the sphere")
    {
        const auto grid = sign_change_grid(sdf::by_name("sphere"), 16);
        InitConfig c;  // analytic sphere, no noise
        const auto mesh = extract(grid, init_params(grid, c, 0));
        // Oracle: points drawn from a finely tessellated sphere of the same radius.
        const auto ref = uv_sphere(Vec3::Zero(), 0.6, 256, 512);
        const double cd = chamfer(sample_surface(mesh, 20000, 1), sample_surface(ref, 20000, 2));
        CHECK(cd < 5e-4);
    }

    TEST_CASE("sample_cameras orbit")
    {
        const Box box{Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5)};
        const auto cams = sample_cameras(7, 4, CameraMode::Orbit, box);
        REQUIRE(cams.size() == 4);
        const double radius = 2.0 * 0.5 * std::sqrt(3.0);
        for (std::size_t i = 0; i < cams.size(); ++i)
        {
            CHECK_NOTHROW(cams[i].validate());
            CHECK(cams[i].position().norm() == doctest::Approx(radius));
            // Looks at the center: the center maps onto the optical axis.
            const Vec3 c = cams[i].to_camera(Vec3::Zero());
            CHECK(std::abs(c.x()) < 1e-9);
            CHECK(std::abs(c.y()) < 1e-9);
            CHECK(c.z() < 0.0);
            for (std::size_t j = 0; j < i; ++j) CHECK((cams[i].position() - cams[j].position()).norm() > 1e-6);
        }
        const auto again = sample_cameras(7, 4, CameraMode::Orbit, box);
        for (std::size_t i = 0; i < cams.size(); ++i) CHECK(cams[i].world_to_camera == again[i].world_to_camera);
    }

    TEST_CASE("interior cameras see the inner wall of a hollow sphere")
    {
        const double r_in = 0.35;
        const auto grid = sign_change_grid(sdf::by_name("hollow"), 32);
        const double h = grid.cell_size().x();
        const Box box{Vec3::Constant(-0.75), Vec3::Constant(0.75)};
        const auto cams = sample_cameras(3, 16, CameraMode::Interior, box);
        int seeing = 0;
        for (const auto & cam : cams)
        {
            CHECK_NOTHROW(cam.validate());
            for (int a = 0; a < 3; ++a)
            {
                CHECK(cam.position()[a] >= box.min[a]);
                CHECK(cam.position()[a] <= box.max[a]);
            }
            bool inner = false;
            for (VoxelId v : active_voxels(grid, mvp(cam)))
            {
                const Vec3 c = grid.voxel_center(v);
                if (std::abs(c.norm() - r_in) < h) inner = true;
                // Nothing behind the camera.
                CHECK(cam.to_camera(c).z() < 0.0);
            }
            seeing += inner;
        }
        CHECK(seeing >= 1);
    }

    TEST_CASE("fit with zero iterations returns the init")
    {
        FitConfig cfg;
        cfg.resolution = 16;
        cfg.iterations = 0;
        cfg.init.noise = 0.05;
        cfg.eval_samples = 2000;
        cfg.seed = 4;
        const auto target = uv_sphere(Vec3::Zero(), 0.6, 32, 64);
        const auto res = fit(target, cfg);
        CHECK(res.report.loss_trace.empty());
        CHECK(res.params == init_params(res.grid, cfg.init, cfg.seed));
        const auto m = extract(res.grid, res.params);
        CHECK(m.vertices == res.mesh.vertices);
        CHECK(m.triangles == res.mesh.triangles);
    }

    TEST_CASE("short fit: trace length, determinism, finite metrics")
    {
        FitConfig cfg;
        cfg.resolution = 16;
        cfg.iterations = 6;
        cfg.image_size = 32;
        cfg.views = 2;
        cfg.init.noise = 0.05;
        cfg.eval_samples = 2000;
        const auto target = uv_sphere(Vec3::Zero(), 0.6, 32, 64);
        const auto a = fit(target, cfg), b = fit(target, cfg);
        CHECK(a.report.loss_trace.size() == 6);
        CHECK(a.report.to_json(false) == b.report.to_json(false));
        CHECK(a.params == b.params);
        CHECK(std::isfinite(a.report.final.cd_e4));
        CHECK(a.report.peak_active > 0);
        CHECK(a.report.peak_active <= a.report.grid_voxels);
    }

    TEST_CASE("fit config parsing")
    {
        const auto cfg = parse_fit_config(R"({"iterations": 12, "visibility": 0.5, "objective": "chamfer",
                                              "loss": {"flex": 0.01}, "init": {"source": "random", "noise": 0.1}})");
        CHECK(cfg.iterations == 12);
        CHECK(cfg.visibility == 0.5);
        CHECK(cfg.objective == Objective::Chamfer);
        CHECK(cfg.init.source == InitSource::Random);
        CHECK(cfg.resolution == FitConfig{}.resolution);

        const auto round = parse_fit_config(fit_config_to_json(cfg));
        CHECK(fit_config_to_json(round) == fit_config_to_json(cfg));

        CHECK_THROWS_AS(parse_fit_config(R"({"iterationz": 3})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_fit_config(R"({"iterations": "many"})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_fit_config(R"({"iterations": -1})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_fit_config(R"({"visibility": 0})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_fit_config(R"({"loss": {"bogus": 1}})"), std::invalid_argument);
        CHECK_THROWS_AS(parse_fit_config("{ not json"), ParseError);
        CHECK_THROWS_AS(load_fit_config("/nonexistent/fit.json"), IoError);
    }

    TEST_CASE("hollow flag sets the interior fraction")
    {
        FitConfig cfg;
        CHECK(cfg.effective_interior_fraction() == 0.0);
        cfg.hollow = true;
        CHECK(cfg.effective_interior_fraction() == 0.25);
        cfg.interior_fraction = 0.0;
        CHECK(cfg.effective_interior_fraction() == 0.0);
    }
}
