#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "sparseflex/meshio.hpp"
#include "sparseflex/shapes.hpp"

using namespace sparseflex;

namespace
{
    const char * kCube =
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
        "f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\nf 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n";

    TriangleMesh random_mesh(std::size_t faces, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-3.0, 5.0);
        TriangleMesh m;
        for (std::size_t i = 0; i < faces + 2; ++i) m.vertices.push_back(Vec3(u(rng), u(rng), u(rng)));
        for (std::uint32_t f = 0; f < faces; ++f) m.triangles.push_back({f, f + 1, f + 2});
        return m;
    }
}  // namespace

TEST_SUITE("meshio")
{
    TEST_CASE("OBJ cube and quads")
    {
        std::istringstream in(kCube);
        const auto m = load_obj(in);
        CHECK(m.num_vertices() == 8);
        CHECK(m.num_faces() == 12);
        CHECK(signed_volume(m) == doctest::Approx(1.0));
        CHECK(surface_area(m) == doctest::Approx(6.0));

        std::istringstream quads("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nf 1 2 3 4\nf 1/1/1 2//2 6 5\n");
        CHECK(load_obj(quads).num_faces() == 4);

        std::istringstream bad("v 0 0 0\nv 1 0\n");
        CHECK_THROWS_AS(load_obj(bad), ParseError);
        std::istringstream badidx("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
        CHECK_THROWS_AS(load_obj(badidx), ParseError);
    }

    TEST_CASE("OBJ and PLY round trips")
    {
        const auto m = random_mesh(10000, 1);
        for (const char * path : {"meshio_rt.obj", "meshio_rt.ply"})
        {
            save_mesh(m, path);
            const auto back = load_mesh(path);
            REQUIRE(back.num_vertices() == m.num_vertices());
            CHECK(back.triangles == m.triangles);
            double dev = 0.0;
            for (std::size_t i = 0; i < m.num_vertices(); ++i) dev = std::max(dev, (back.vertices[i] - m.vertices[i]).cwiseAbs().maxCoeff());
            CHECK(dev < 1e-6);
        }
        CHECK_THROWS_AS(load_mesh("does-not-exist.obj"), IoError);
        CHECK_THROWS(load_mesh("meshio_rt.xyz"));
    }

    TEST_CASE("normalize_mesh")
    {
        TriangleMesh box;
        box.vertices = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 2), Vec3(2, 2, 2)};
        box.triangles = {{0, 1, 2}, {0, 3, 4}};
        const auto [n, t] = normalize_mesh(box);
        CHECK(t.apply(Vec3(1, 1, 1)).norm() < 1e-15);
        CHECK(t.scale == doctest::Approx(0.95));

        const auto [again, t2] = normalize_mesh(n);
        for (std::size_t i = 0; i < n.num_vertices(); ++i) CHECK((again.vertices[i] - n.vertices[i]).norm() < 1e-12);

        const auto r = random_mesh(50, 2);
        const auto [rn, rt] = normalize_mesh(r);
        for (std::size_t i = 0; i < r.num_vertices(); ++i) CHECK((rt.invert(rn.vertices[i]) - r.vertices[i]).norm() < 1e-9);
        CHECK_THROWS_AS(normalize_mesh(TriangleMesh{}), std::invalid_argument);
    }

    TEST_CASE("surface sampling")
    {
        TriangleMesh tri;
        tri.vertices = {Vec3(0.1, 0.2, 0.3), Vec3(1.0, -0.5, 0.7), Vec3(-0.4, 0.9, 1.1)};
        tri.triangles = {{0, 1, 2}};
        const Vec3 n = (tri.vertices[1] - tri.vertices[0]).cross(tri.vertices[2] - tri.vertices[0]).normalized();
        const auto pc = sample_surface(tri, 100, 3);
        for (const auto & p : pc.points) CHECK(std::abs(n.dot(p - tri.vertices[0])) < 1e-9);

        // Areas 1 and 3.
        TriangleMesh two;
        two.vertices = {Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 5), Vec3(6, 0, 5), Vec3(0, 1, 5)};
        two.triangles = {{0, 1, 2}, {3, 4, 5}};
        const auto s = sample_surface(two, 10000, 4);
        std::size_t low = 0;
        for (const auto & p : s.points) low += p.z() < 2.5;
        const double sigma = std::sqrt(10000 * 0.25 * 0.75);
        CHECK(std::abs(static_cast<double>(low) - 2500.0) < 3 * sigma);

        const auto a = sample_surface(two, 500, 9);
        const auto b = sample_surface(two, 500, 9);
        CHECK(a.points == b.points);
        CHECK(a.normals == b.normals);
        CHECK_THROWS_AS(sample_surface(two, 0, 1), std::invalid_argument);
    }

    TEST_CASE("closest point and distance")
    {
        const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
        TriFeature f;
        CHECK(closest_point_on_triangle(Vec3(0.2, 0.2, 3), a, b, c, &f).isApprox(Vec3(0.2, 0.2, 0)));
        CHECK(f == TriFeature::Face);
        CHECK(closest_point_on_triangle(Vec3(-1, -1, 0), a, b, c, &f).isApprox(a));
        CHECK(f == TriFeature::VertexA);
        CHECK(closest_point_on_triangle(Vec3(0.5, -2, 0), a, b, c, &f).isApprox(Vec3(0.5, 0, 0)));
        CHECK(f == TriFeature::EdgeAB);
        TriangleMesh m;
        m.vertices = {a, b, c};
        m.triangles = {{0, 1, 2}};
        CHECK(distance_to_mesh(Vec3(0.2, 0.2, -0.5), m) == doctest::Approx(0.5));
    }

    TEST_CASE("voxelize_mesh band and rim trim")
    {
        const auto sphere = uv_sphere(Vec3::Zero(), 0.6, 32, 64);
        const auto g = voxelize_mesh(sphere, 32, Box{}, 1.0);
        const double h = 2.0 / 32;
        for (VoxelId v = 0; v < g.num_voxels(); ++v)
            CHECK(std::abs(g.voxel_center(v).norm() - 0.6) < 1.05 * h + 1e-3);

        const auto hemi = uv_hemisphere(Vec3::Zero(), 0.6, 16, 64);
        const auto trimmed = voxelize_mesh(hemi, 32, Box{}, 2.0, true);
        const auto open = voxelize_mesh(hemi, 32, Box{}, 2.0, false);
        CHECK(trimmed.num_voxels() < open.num_voxels());
    }

    TEST_CASE("point files")
    {
        PointCloud pc;
        pc.points = {Vec3(1, 2, 3), Vec3(-0.5, 0.25, 1e-7)};
        save_points(pc, "meshio_pts.xyz");
        const auto back = load_points("meshio_pts.xyz");
        REQUIRE(back.size() == 2);
        CHECK((back.points[1] - pc.points[1]).norm() < 1e-12);
    }
}
