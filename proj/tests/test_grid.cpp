#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "sparseflex/grid.hpp"
#include "sparseflex/morton.hpp"

using namespace sparseflex;

namespace
{
    PointCloud sphere_points(std::size_t n, double r, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        PointCloud pc;
        for (std::size_t i = 0; i < n; ++i)
        {
            Vec3 d(g(rng), g(rng), g(rng));
            pc.points.push_back(r * d.normalized());
        }
        return pc;
    }
}  // namespace

TEST_SUITE("grid")
{
    TEST_CASE("build_grid dedups and shares corners")
    {
        std::vector<VoxelCoord> twice{{0, 0, 0}, {0, 0, 0}};
        auto g = build_grid(twice, 2);
        CHECK(g.num_voxels() == 1);
        CHECK(g.num_corners() == 8);

        std::vector<VoxelCoord> pair{{0, 0, 0}, {1, 0, 0}};
        g = build_grid(pair, 2);
        CHECK(g.num_voxels() == 2);
        CHECK(g.num_corners() == 12);

        std::vector<VoxelCoord> all;
        for (std::uint32_t k = 0; k < 2; ++k)
            for (std::uint32_t j = 0; j < 2; ++j)
                for (std::uint32_t i = 0; i < 2; ++i) all.push_back({i, j, k});
        g = build_grid(all, 2);
        CHECK(g.num_voxels() == 8);
        CHECK(g.num_corners() == 27);
    }

    TEST_CASE("build_grid rejects bad input")
    {
        std::vector<VoxelCoord> out{{2, 0, 0}};
        CHECK_THROWS_AS(build_grid(out, 2), std::out_of_range);
        std::vector<VoxelCoord> none;
        CHECK_THROWS_AS(build_grid(none, 0), std::invalid_argument);
    }

    TEST_CASE("voxels are in Morton order and corners are unique lattice points")
    {
        std::mt19937 rng(3);
        std::uniform_int_distribution<std::uint32_t> u(0, 15);
        std::vector<VoxelCoord> coords;
        for (int n = 0; n < 500; ++n) coords.push_back({u(rng), u(rng), u(rng)});
        const auto g = build_grid(coords, 16);
        for (VoxelId v = 1; v < g.num_voxels(); ++v) CHECK(g.code(v - 1) < g.code(v));
        for (VoxelId v = 0; v < g.num_voxels(); ++v)
        {
            const auto & p = g.voxel(v);
            CHECK(g.code(v) == morton::encode(p.i, p.j, p.k));
        }

        std::set<std::array<std::uint32_t, 3>> seen;
        std::vector<char> used(g.num_corners(), 0);
        for (CornerId c = 0; c < g.num_corners(); ++c)
        {
            const auto & q = g.corner_coord(c);
            CHECK(seen.insert({q.i, q.j, q.k}).second);
        }
        for (VoxelId v = 0; v < g.num_voxels(); ++v)
            for (int c = 0; c < 8; ++c)
            {
                const auto & q = g.corner_coord(g.corners(v)[c]);
                const auto & p = g.voxel(v);
                CHECK(q.i == p.i + (c & 1));
                CHECK(q.j == p.j + ((c >> 1) & 1));
                CHECK(q.k == p.k + ((c >> 2) & 1));
                used[g.corners(v)[c]] = 1;
            }
        for (char x : used) CHECK(x == 1);
        CHECK(g.num_voxels() <= 16u * 16u * 16u);
        CHECK(g.num_corners() <= 17u * 17u * 17u);
    }

    TEST_CASE("voxelize_points boundary conventions")
    {
        PointCloud lo;
        lo.points = {Vec3(-1, -1, -1)};
        auto g = voxelize_points(lo, 2);
        REQUIRE(g.num_voxels() == 1);
        CHECK(g.voxel(0) == VoxelCoord{0, 0, 0});

        PointCloud hi;
        hi.points = {Vec3(1, 1, 1)};
        g = voxelize_points(hi, 2);
        REQUIRE(g.num_voxels() == 1);
        CHECK(g.voxel(0) == VoxelCoord{1, 1, 1});

        PointCloud outside;
        outside.points = {Vec3(1.01, 0, 0)};
        CHECK_THROWS_AS(voxelize_points(outside, 2), std::out_of_range);
    }

    TEST_CASE("voxelize_points matches a dense occupancy scan")
    {
        const auto pc = sphere_points(10000, 0.6, 11);
        const std::uint32_t n = 32;
        const auto g = voxelize_points(pc, n);

        // Brute force: every cell of the 32^3 lattice tests every point.
        const double h = 2.0 / n;
        std::size_t count = 0;
        std::vector<char> occ(n * n * n, 0);
        for (const auto & p : pc.points)
        {
            int idx[3];
            for (int d = 0; d < 3; ++d) idx[d] = std::min<int>(n - 1, static_cast<int>(std::floor((p[d] + 1.0) / h)));
            occ[(idx[2] * n + idx[1]) * n + idx[0]] = 1;
        }
        for (char c : occ) count += c;
        CHECK(g.num_voxels() == count);
        for (VoxelId v = 0; v < g.num_voxels(); ++v)
        {
            const auto & p = g.voxel(v);
            CHECK(occ[(p.k * n + p.j) * n + p.i] == 1);
        }
        CHECK(static_cast<double>(g.num_voxels()) / (n * n * n) < 0.15);
    }

    TEST_CASE("edge_adjacent_voxels")
    {
        std::vector<VoxelCoord> all;
        for (std::uint32_t k = 0; k < 2; ++k)
            for (std::uint32_t j = 0; j < 2; ++j)
                for (std::uint32_t i = 0; i < 2; ++i) all.push_back({i, j, k});
        const auto block = build_grid(all, 2);
        CHECK(edge_adjacent_voxels(block, LatticeEdge{{1, 1, 0}, 2}).size() == 4);

        std::vector<VoxelCoord> one{{0, 0, 0}};
        const auto single = build_grid(one, 2);
        for (int axis = 0; axis < 3; ++axis)
            for (std::uint32_t a = 0; a < 2; ++a)
                for (std::uint32_t b = 0; b < 2; ++b)
                {
                    VoxelCoord o{0, 0, 0};
                    o[(axis + 1) % 3] = a;
                    o[(axis + 2) % 3] = b;
                    CHECK(edge_adjacent_voxels(single, LatticeEdge{o, axis}).size() == 1);
                }

        std::vector<VoxelCoord> pair{{0, 0, 0}, {1, 0, 0}};
        const auto two = build_grid(pair, 2);
        // Edge along y at x = 1, z = 0 lies on the shared face.
        CHECK(edge_adjacent_voxels(two, LatticeEdge{{1, 0, 0}, 1}).size() == 2);
    }

    TEST_CASE("lattice edge ids round-trip")
    {
        const LatticeEdge e{{5, 7, 9}, 2};
        CHECK(LatticeEdge::from_id(e.id()) == e);
        CHECK(LatticeEdge::from_corners({5, 7, 9}, {5, 7, 10}, 16) == e);
        CHECK_THROWS_AS(LatticeEdge::from_corners({5, 7, 9}, {6, 7, 10}, 16), std::invalid_argument);
    }

    TEST_CASE("subset and dilate")
    {
        const auto pc = sphere_points(2000, 0.6, 5);
        const auto g = voxelize_points(pc, 16);
        std::vector<VoxelId> even;
        for (VoxelId v = 0; v < g.num_voxels(); v += 2) even.push_back(v);
        const auto s = subset(g, even);
        CHECK(s.num_voxels() == even.size());
        for (std::size_t i = 0; i < even.size(); ++i) CHECK(s.voxel(static_cast<VoxelId>(i)) == g.voxel(even[i]));

        std::vector<VoxelId> one{0};
        const auto d = dilate(g, one, 1);
        CHECK(std::is_sorted(d.begin(), d.end()));
        const auto & p0 = g.voxel(0);
        std::size_t expect = 0;
        for (VoxelId v = 0; v < g.num_voxels(); ++v)
        {
            const auto & p = g.voxel(v);
            const bool near = std::abs(int(p.i) - int(p0.i)) <= 1 && std::abs(int(p.j) - int(p0.j)) <= 1
                && std::abs(int(p.k) - int(p0.k)) <= 1;
            expect += near;
        }
        CHECK(d.size() == expect);
        CHECK(dilate(g, one, 0) == one);
    }

    TEST_CASE("grid serialization round-trips")
    {
        const auto g = voxelize_points(sphere_points(3000, 0.5, 9), 32);
        std::stringstream ss;
        write_grid(ss, g);
        const auto back = read_grid(ss);
        CHECK(back == g);

        std::stringstream bad("not a grid");
        CHECK_THROWS(read_grid(bad));
    }
}
