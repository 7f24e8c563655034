#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "oracles/dense_dmc.hpp"
#include "oracles/fd.hpp"
#include "sparseflex/flexicubes.hpp"
#include "sparseflex/metrics.hpp"
#include "sparseflex/shapes.hpp"

using namespace sparseflex;

namespace
{
    SparseGrid full_grid(std::uint32_t n)
    {
        std::vector<VoxelCoord> c;
        for (std::uint32_t k = 0; k < n; ++k)
            for (std::uint32_t j = 0; j < n; ++j)
                for (std::uint32_t i = 0; i < n; ++i) c.push_back({i, j, k});
        return build_grid(c, n);
    }

    FlexParams random_params(const SparseGrid & g, std::mt19937_64 & rng)
    {
        std::uniform_real_distribution<double> s(-1.0, 1.0), w(0.5, 2.0), u(-1.0, 1.0);
        FlexParams p = FlexParams::uniform(g, 0.0);
        const double lim = 0.5 * g.cell_size().x();
        for (auto & x : p.sdf)
        {
            do x = s(rng);
            while (std::abs(x) < 0.05);  // keep signs stable and the crossings well conditioned
        }
        for (auto & d : p.deform) d = 0.9 * lim * Vec3(u(rng), u(rng), u(rng));
        for (auto & a : p.alpha)
            for (auto & x : a) x = w(rng);
        for (auto & b : p.beta)
            for (auto & x : b) x = w(rng);
        return p;
    }

    // sum_i w_i . v_i over the extracted vertices
    double probe(const SparseGrid & g, const FlexParams & p, std::span<const VoxelId> active, const std::vector<Vec3> & w)
    {
        const auto m = extract(g, p, active);
        double sum = 0.0;
        for (std::size_t i = 0; i < m.vertices.size(); ++i) sum += w[i].dot(m.vertices[i]);
        return sum;
    }

    // Largest relative error over `samples` randomly chosen parameters of each kind.
    double backward_error(const SparseGrid & g, FlexParams p, std::span<const VoxelId> active, std::mt19937_64 & rng,
                          int samples)
    {
        const auto mesh = extract(g, p, active);
        if (mesh.vertices.empty()) return 0.0;
        std::normal_distribution<double> n01(0.0, 1.0);
        std::vector<Vec3> w(mesh.vertices.size());
        for (auto & x : w) x = Vec3(n01(rng), n01(rng), n01(rng));
        const auto grad = extract_backward(g, p, mesh, w);
        auto f = [&] { return probe(g, p, active, w); };
        const double h = 1e-5;
        double worst = 0.0;
        std::uniform_int_distribution<std::size_t> pc(0, g.num_corners() - 1), pv(0, g.num_voxels() - 1);
        for (int k = 0; k < samples; ++k)
        {
            const std::size_t c = pc(rng);
            worst = std::max(worst, oracle::rel_err(grad.d_sdf[c], oracle::central(f, p.sdf[c], h)));
            const int axis = k % 3;
            worst = std::max(worst, oracle::rel_err(grad.d_deform[c][axis], oracle::central(f, p.deform[c][axis], h)));
            const std::size_t v = pv(rng);
            worst = std::max(worst, oracle::rel_err(grad.d_alpha[v][k % 8], oracle::central(f, p.alpha[v][k % 8], h)));
            worst = std::max(worst, oracle::rel_err(grad.d_beta[v][k % 12], oracle::central(f, p.beta[v][k % 12], h)));
        }
        return worst;
    }
}  // namespace

TEST_SUITE("flexicubes")
{
    TEST_CASE("edge_crossing examples")
    {
        const Vec3 a(0, 0, 0), b(1, 0, 0);
        CHECK((edge_crossing(a, b, 1, -1, 1, 1) - Vec3(0.5, 0, 0)).norm() < 1e-15);
        CHECK((edge_crossing(a, b, 3, -1, 1, 1) - Vec3(0.75, 0, 0)).norm() < 1e-15);
        // t = a_a s_a / (a_a s_a - a_b s_b) = 2 / 3, evaluated separately in scalars
        const double sa = 1.0, sb = -1.0, aa = 2.0, ab = 1.0;
        const double t = (aa * sa) / (aa * sa - ab * sb);
        CHECK(edge_crossing(a, b, sa, sb, aa, ab).x() == doctest::Approx(t).epsilon(1e-15));
        CHECK(edge_crossing(a, b, sa, sb, aa, ab).x() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
        CHECK_THROWS_AS(edge_crossing(a, b, 1, 2, 1, 1), std::logic_error);
    }

    TEST_CASE("all positive gives an empty mesh")
    {
        const auto g = full_grid(4);
        CHECK(extract(g, FlexParams::uniform(g, 0.3)).empty());
    }

    TEST_CASE("plane SDF gives a flat sheet")
    {
        const auto g = full_grid(4);
        const auto p = sample_params(g, sdf::plane_z(0.25));
        const auto m = extract(g, p);
        REQUIRE(!m.empty());
        for (const auto & v : m.vertices) CHECK(std::abs(v.z() - 0.25) < 1e-12);
        CHECK(boundary_stats(m).boundary_edges > 0);
    }

    TEST_CASE("sphere sign-change grid extracts a closed genus-0 surface")
    {
        const auto fn = sdf::sphere(Vec3::Zero(), 0.6);
        const auto g = sign_change_grid(fn, 16);
        const auto m = extract(g, sample_params(g, fn));
        const auto b = boundary_stats(m);
        CHECK(b.boundary_edges == 0);
        CHECK(b.euler == 2);
        CHECK(b.nonmanifold_edges == 0);
    }

    TEST_CASE("sparse extraction matches the dense reference")
    {
        for (const char * name : {"sphere", "plane"})
            for (std::uint32_t n : {8u, 16u, 32u})
            {
                CAPTURE(name);
                CAPTURE(n);
                const auto fn = sdf::by_name(name);
                const auto g = sign_change_grid(fn, n);
                const auto m = extract(g, sample_params(g, fn));
                const auto ref = oracle::dense_dmc([&](const Eigen::Vector3d & p) { return fn(p); }, static_cast<int>(n));

                CHECK(m.num_vertices() == ref.vertices);
                CHECK(m.num_faces() == 2 * ref.quads.size());
                std::size_t matched = 0;
                for (std::size_t f = 0; f < m.num_faces(); f += 2)
                {
                    const auto e = LatticeEdge::from_id(m.face_edge[f]);
                    const auto it = ref.quads.find({int(e.origin.i), int(e.origin.j), int(e.origin.k), e.axis});
                    REQUIRE(it != ref.quads.end());
                    // The two triangles cover the quad's four vertices.
                    std::set<std::uint32_t> ids(m.triangles[f].begin(), m.triangles[f].end());
                    ids.insert(m.triangles[f + 1].begin(), m.triangles[f + 1].end());
                    REQUIRE(ids.size() == 4);
                    for (const auto & rv : it->second.v)
                    {
                        double best = 1e300;
                        for (auto id : ids) best = std::min(best, (m.vertices[id] - rv).norm());
                        CHECK(best < 1e-9);
                    }
                    // Winding: normal points from negative to positive along the edge.
                    // Quad area vector, summed over both triangles (one may fold on a bent quad).
                    Vec3 nrm = Vec3::Zero();
                    for (std::size_t h = f; h < f + 2; ++h)
                    {
                        const auto & t = m.triangles[h];
                        nrm += (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
                    }
                    const double along = nrm[e.axis];
                    CHECK((it->second.flip ? along < 0 : along > 0));
                    ++matched;
                }
                CHECK(matched == ref.quads.size());
            }
    }

    TEST_CASE("sectional extraction keeps only fully active faces")
    {
        const auto fn = sdf::sphere(Vec3::Zero(), 0.6);
        const auto g = sign_change_grid(fn, 16);
        const auto p = sample_params(g, fn);
        const auto full = extract(g, p);
        std::vector<VoxelId> half;
        for (VoxelId v = 0; v < g.num_voxels(); ++v)
            if (g.voxel_center(v).x() < 0.1) half.push_back(v);
        std::vector<char> act(g.num_voxels(), 0);
        for (auto v : half) act[v] = 1;
        const auto part = extract(g, p, half);

        std::set<EdgeId> expect;
        for (std::size_t f = 0; f < full.num_faces(); ++f)
        {
            bool all = true;
            for (const auto & r : edge_ring(g, LatticeEdge::from_id(full.face_edge[f]))) all = all && r && act[*r];
            if (all) expect.insert(full.face_edge[f]);
        }
        const std::set<EdgeId> got(part.face_edge.begin(), part.face_edge.end());
        CHECK(got == expect);
        // Vertices are the same points as in the full mesh.
        for (std::size_t i = 0; i < part.num_vertices(); ++i)
        {
            const auto it = std::find(full.vertex_voxel.begin(), full.vertex_voxel.end(), part.vertex_voxel[i]);
            REQUIRE(it != full.vertex_voxel.end());
            CHECK((full.vertices[it - full.vertex_voxel.begin()] - part.vertices[i]).norm() == 0.0);
        }
        CHECK_THROWS_AS(extract(g, p, std::vector<VoxelId>{static_cast<VoxelId>(g.num_voxels())}), std::invalid_argument);
    }

    TEST_CASE("single crossing edge derivative")
    {
        // One voxel whose only crossing edge is corner 0 -> corner 1 along x.
        std::vector<VoxelCoord> one{{0, 0, 0}};
        const auto g = build_grid(one, 1, Box{Vec3::Zero(), Vec3::Ones()});
        auto p = FlexParams::uniform(g, -1.0);
        p.sdf[g.corners(0)[0]] = 1.0;
        // Three edges leave corner 0; the vertex is their mean, so isolate x of the x-edge.
        const auto m = extract(g, p, std::vector<VoxelId>{0});
        REQUIRE(m.num_vertices() == 1);
        std::vector<Vec3> d{Vec3(1, 0, 0)};
        const auto grad = extract_backward(g, p, m, d);
        // x of the vertex = (0.5 + 0 + 0) / 3; dx/ds_a on the x edge = -s_b / (s_a - s_b)^2 = 0.25.
        CHECK(grad.d_sdf[g.corners(0)[0]] == doctest::Approx(0.25 / 3.0).epsilon(1e-12));
        auto f = [&] { return extract(g, p, std::vector<VoxelId>{0}).vertices[0].x(); };
        CHECK(oracle::central(f, p.sdf[g.corners(0)[0]], 1e-5) == doctest::Approx(0.25 / 3.0).epsilon(1e-9));
    }

    TEST_CASE("zero vertex gradients give zero parameter gradients")
    {
        const auto fn = sdf::sphere(Vec3::Zero(), 0.6);
        const auto g = sign_change_grid(fn, 8);
        const auto p = sample_params(g, fn);
        const auto m = extract(g, p);
        const auto grad = extract_backward(g, p, m, std::vector<Vec3>(m.num_vertices(), Vec3::Zero()));
        CHECK(grad.max_abs() == 0.0);
    }

    TEST_CASE("extract_backward matches finite differences on 100 random configurations")
    {
        const auto g = full_grid(8);
        std::mt19937_64 rng(2024);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial)
        {
            const auto p = random_params(g, rng);
            std::vector<VoxelId> all(g.num_voxels());
            for (VoxelId v = 0; v < all.size(); ++v) all[v] = v;
            worst = std::max(worst, backward_error(g, p, all, rng, 8));
        }
        CHECK(worst < 1e-4);
    }

    TEST_CASE("extract_backward on sectional meshes matches finite differences")
    {
        const auto g = full_grid(8);
        std::mt19937_64 rng(77);
        std::bernoulli_distribution keep(0.6);
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial)
        {
            const auto p = random_params(g, rng);
            std::vector<VoxelId> some;
            for (VoxelId v = 0; v < g.num_voxels(); ++v)
                if (keep(rng)) some.push_back(v);
            worst = std::max(worst, backward_error(g, p, some, rng, 8));
        }
        CHECK(worst < 1e-4);
    }

    TEST_CASE("clamp_params and validate")
    {
        const auto g = full_grid(2);
        auto p = FlexParams::uniform(g, 0.1);
        p.deform[0] = Vec3(10, -10, 0.1);
        p.alpha[0][0] = -3.0;
        clamp_params(p, g);
        CHECK(p.deform[0].x() == doctest::Approx(0.5));
        CHECK(p.deform[0].y() == doctest::Approx(-0.5));
        CHECK(p.deform[0].z() == doctest::Approx(0.1));
        CHECK(p.alpha[0][0] == doctest::Approx(1e-3));
        CHECK_NOTHROW(p.validate(g));
        p.beta[1][3] = 0.0;
        CHECK_THROWS_AS(p.validate(g), std::invalid_argument);
    }

    TEST_CASE("params serialization round-trips and checks the grid")
    {
        const auto g = full_grid(4);
        std::mt19937_64 rng(5);
        const auto p = random_params(g, rng);
        std::stringstream ss;
        write_params(ss, p);
        CHECK(read_params(ss, g) == p);
        std::stringstream again;
        write_params(again, p);
        CHECK_THROWS(read_params(again, full_grid(2)));
    }
}
