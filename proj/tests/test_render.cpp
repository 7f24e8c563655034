#include <doctest.h>

#include <numbers>
#include <random>

#include "oracles/fd.hpp"
#include "sparseflex/render.hpp"

using namespace sparseflex;

namespace
{
    Camera cam()
    {
        Camera c;
        c.fov_y = std::numbers::pi / 2;
        c.near = 0.1;
        c.far = 10.0;
        return c;
    }

    // Triangle in the plane z = -depth, large enough to cover the whole view.
    TriangleMesh screen_triangle(double depth)
    {
        TriangleMesh m;
        const double s = 10.0 * depth;
        m.vertices = {Vec3(-s, -s, -depth), Vec3(3 * s, -s, -depth), Vec3(-s, 3 * s, -depth)};
        m.triangles = {{0, 1, 2}};
        return m;
    }
}  // namespace

TEST_SUITE("render")
{
    TEST_CASE("empty mesh renders background")
    {
        const auto b = rasterize(TriangleMesh{}, cam(), 8, 10);
        CHECK(b.consistent());
        for (std::size_t p = 0; p < b.size(); ++p)
        {
            CHECK(b.mask[p] == 0);
            CHECK(b.face_id[p] == -1);
        }
    }

    TEST_CASE("full-screen triangle at depth 2")
    {
        const auto b = rasterize(screen_triangle(2.0), cam(), 16, 16);
        CHECK(b.consistent());
        for (std::size_t p = 0; p < b.size(); ++p)
        {
            CHECK(b.mask[p] == 1);
            CHECK(std::abs(b.depth[p] - 2.0) < 1e-9);
            CHECK(b.normal[p].isApprox(Vec3(0, 0, 1)));
        }
    }

    TEST_CASE("z-test keeps the nearer triangle")
    {
        auto far = screen_triangle(2.0);
        const auto nearm = screen_triangle(1.0);
        TriangleMesh both = far;
        both.vertices.insert(both.vertices.end(), nearm.vertices.begin(), nearm.vertices.end());
        both.triangles.push_back({3, 4, 5});
        const auto b = rasterize(both, cam(), 12, 12);
        for (std::size_t p = 0; p < b.size(); ++p) CHECK(b.face_id[p] == 1);
    }

    TEST_CASE("geometry outside the depth range is clipped")
    {
        Camera c = cam();
        c.far = 1.5;
        CHECK(rasterize(screen_triangle(2.0), c, 8, 8).mask[0] == 0);
    }

    TEST_CASE("zero gradients give zero vertex gradients")
    {
        const auto m = screen_triangle(2.0);
        const auto b = rasterize(m, cam(), 8, 8);
        const auto g = rasterize_backward(m, cam(), b, std::vector<double>(b.size(), 0.0), std::vector<Vec3>(b.size(), Vec3::Zero()));
        for (const auto & v : g) CHECK(v.isZero(0.0));
    }

    TEST_CASE("translating a full-screen triangle along the axis")
    {
        const auto m = screen_triangle(2.0);
        const auto b = rasterize(m, cam(), 8, 8);
        std::vector<double> dd(b.size(), 0.3);
        const auto g = rasterize_backward(m, cam(), b, dd, std::vector<Vec3>(b.size(), Vec3::Zero()));
        // Moving every vertex by eps along -z raises every depth by eps: derivative = sum d_depth.
        double dir = 0.0;
        for (const auto & v : g) dir += v.dot(Vec3(0, 0, -1));
        CHECK(std::abs(dir - 0.3 * b.size()) < 1e-6);
    }

    TEST_CASE("rasterize_backward matches finite differences with coverage frozen")
    {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial)
        {
            TriangleMesh m;
            for (int i = 0; i < 6; ++i) m.vertices.push_back(Vec3(0.8 * u(rng), 0.8 * u(rng), -2.0 + 0.5 * u(rng)));
            m.triangles = {{0, 1, 2}, {3, 4, 5}, {0, 4, 2}};
            const Camera c = cam();
            const auto b = rasterize(m, c, 24, 24);
            std::vector<double> dd(b.size());
            std::vector<Vec3> dn(b.size());
            for (std::size_t p = 0; p < b.size(); ++p)
            {
                dd[p] = u(rng);
                dn[p] = Vec3(u(rng), u(rng), u(rng));
            }
            const auto g = rasterize_backward(m, c, b, dd, dn);

            // Surrogate re-evaluated with the original pixel-to-face map.
            auto f = [&] {
                double s = 0.0;
                for (int y = 0; y < b.height; ++y)
                    for (int x = 0; x < b.width; ++x)
                    {
                        const std::size_t p = static_cast<std::size_t>(y) * b.width + x;
                        if (b.face_id[p] < 0) continue;
                        const auto & t = m.triangles[b.face_id[p]];
                        const Vec3 a = c.to_camera(m.vertices[t[0]]);
                        const Vec3 e1 = c.to_camera(m.vertices[t[1]]) - a;
                        const Vec3 e2 = c.to_camera(m.vertices[t[2]]) - a;
                        Vec3 n = e1.cross(e2).normalized();
                        if (n.dot(a) > 0.0) n = -n;
                        const Vec3 d = pixel_ray(c, b.height, b.width, x, y);
                        const double tt = n.dot(a) / n.dot(d);  // hit distance along d (d.z = -1 -> depth)
                        s += dd[p] * tt + dn[p].dot(n);
                    }
                return s;
            };
            for (std::size_t v = 0; v < m.vertices.size(); ++v)
                for (int k = 0; k < 3; ++k)
                {
                    const double fd = oracle::central(f, m.vertices[v][k], 1e-6);
                    worst = std::max(worst, oracle::rel_err(g[v][k], fd, 1e-3));
                }
        }
        CHECK(worst < 1e-3);
    }

    TEST_CASE("image writers")
    {
        const auto b = rasterize(screen_triangle(2.0), cam(), 4, 4);
        CHECK_NOTHROW(write_depth_pfm("render_test_depth.pfm", b));
        CHECK_NOTHROW(write_normal_png("render_test_normal.png", b));
        CHECK_NOTHROW(write_mask_png("render_test_mask.png", b));
        CHECK_THROWS_AS(write_depth_pfm("/nonexistent-dir/x.pfm", b), IoError);
    }
}
