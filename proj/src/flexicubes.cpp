#include "sparseflex/flexicubes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparseflex/parallel.hpp"

namespace sparseflex
{
    namespace
    {
        // Dual vertex of voxel v, or false when its corner signs agree.
        bool dual_vertex(const SparseGrid & grid, const FlexParams & params, VoxelId v, Vec3 & out)
        {
            const auto & corners = grid.corners(v);
            const auto & alpha = params.alpha[v];
            const auto & beta = params.beta[v];
            Vec3 sum = Vec3::Zero();
            double weight = 0.0;
            for (int e = 0; e < 12; ++e)
            {
                const auto & le = local_edges()[e];
                const double sa = params.sdf[corners[le.corner_lo]];
                const double sb = params.sdf[corners[le.corner_hi]];
                if (is_positive(sa) == is_positive(sb)) continue;
                const Vec3 pa = deformed_corner(grid, params, corners[le.corner_lo]);
                const Vec3 pb = deformed_corner(grid, params, corners[le.corner_hi]);
                const double t = crossing_t(sa, sb, alpha[le.corner_lo], alpha[le.corner_hi]);
                sum += beta[e] * (pa + t * (pb - pa));
                weight += beta[e];
            }
            if (weight == 0.0) return false;
            out = sum / weight;
            return true;
        }

        struct FaceBatch
        {
            std::vector<Triangle> triangles;  // voxel ids, remapped to vertex ids afterwards
            std::vector<EdgeId> edges;
        };
    }  // namespace

    FlexParams FlexParams::uniform(const SparseGrid & grid, double sdf_value)
    {
        FlexParams p;
        p.sdf.assign(grid.num_corners(), sdf_value);
        p.deform.assign(grid.num_corners(), Vec3::Zero());
        std::array<double, 8> a;
        a.fill(1.0);
        std::array<double, 12> b;
        b.fill(1.0);
        p.alpha.assign(grid.num_voxels(), a);
        p.beta.assign(grid.num_voxels(), b);
        return p;
    }

    void FlexParams::validate(const SparseGrid & grid) const
    {
        if (sdf.size() != grid.num_corners() || deform.size() != grid.num_corners())
            throw std::invalid_argument("per-corner parameter count does not match the grid");
        if (alpha.size() != grid.num_voxels() || beta.size() != grid.num_voxels())
            throw std::invalid_argument("per-voxel parameter count does not match the grid");
        for (std::size_t c = 0; c < sdf.size(); ++c)
            if (!std::isfinite(sdf[c]) || !deform[c].allFinite())
                throw std::invalid_argument("non-finite corner parameter");
        for (std::size_t v = 0; v < alpha.size(); ++v)
        {
            for (double a : alpha[v])
                if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("alpha weights must be positive");
            for (double b : beta[v])
                if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("beta weights must be positive");
        }
    }

    ParamGradients ParamGradients::zeros(const SparseGrid & grid)
    {
        ParamGradients g;
        g.d_sdf.assign(grid.num_corners(), 0.0);
        g.d_deform.assign(grid.num_corners(), Vec3::Zero());
        g.d_alpha.assign(grid.num_voxels(), std::array<double, 8>{});
        g.d_beta.assign(grid.num_voxels(), std::array<double, 12>{});
        return g;
    }

    ParamGradients & ParamGradients::operator+=(const ParamGradients & o)
    {
        if (o.d_sdf.size() != d_sdf.size() || o.d_alpha.size() != d_alpha.size())
            throw std::invalid_argument("gradient shapes differ");
        for (std::size_t i = 0; i < d_sdf.size(); ++i)
        {
            d_sdf[i] += o.d_sdf[i];
            d_deform[i] += o.d_deform[i];
        }
        for (std::size_t v = 0; v < d_alpha.size(); ++v)
        {
            for (int c = 0; c < 8; ++c) d_alpha[v][c] += o.d_alpha[v][c];
            for (int e = 0; e < 12; ++e) d_beta[v][e] += o.d_beta[v][e];
        }
        return *this;
    }

    ParamGradients & ParamGradients::operator*=(double k)
    {
        for (auto & x : d_sdf) x *= k;
        for (auto & x : d_deform) x *= k;
        for (auto & a : d_alpha)
            for (auto & x : a) x *= k;
        for (auto & b : d_beta)
            for (auto & x : b) x *= k;
        return *this;
    }

    double ParamGradients::max_abs() const
    {
        double m = 0.0;
        for (double x : d_sdf) m = std::max(m, std::abs(x));
        for (const auto & x : d_deform) m = std::max(m, x.cwiseAbs().maxCoeff());
        for (const auto & a : d_alpha)
            for (double x : a) m = std::max(m, std::abs(x));
        for (const auto & b : d_beta)
            for (double x : b) m = std::max(m, std::abs(x));
        return m;
    }

    void clamp_params(FlexParams & params, const SparseGrid & grid, double min_weight)
    {
        const Vec3 limit = 0.5 * grid.cell_size();
        for (auto & d : params.deform) d = d.cwiseMax(-limit).cwiseMin(limit);
        for (auto & a : params.alpha)
            for (auto & x : a) x = std::max(x, min_weight);
        for (auto & b : params.beta)
            for (auto & x : b) x = std::max(x, min_weight);
    }

    double crossing_t(double s_a, double s_b, double alpha_a, double alpha_b)
    {
        const double a = alpha_a * s_a;
        return a / (a - alpha_b * s_b);
    }

    Vec3 edge_crossing(const Vec3 & p_a, const Vec3 & p_b, double s_a, double s_b, double alpha_a, double alpha_b)
    {
        if (is_positive(s_a) == is_positive(s_b))
            throw std::logic_error("edge_crossing requires endpoint SDF values of opposite sign");
        const double t = crossing_t(s_a, s_b, alpha_a, alpha_b);
        return (1.0 - t) * p_a + t * p_b;
    }

    TriangleMesh extract(const SparseGrid & grid, const FlexParams & params)
    {
        std::vector<VoxelId> all(grid.num_voxels());
        for (VoxelId v = 0; v < all.size(); ++v) all[v] = v;
        return extract(grid, params, all);
    }

    TriangleMesh extract(const SparseGrid & grid, const FlexParams & params, std::span<const VoxelId> active_in)
    {
        if (params.sdf.size() != grid.num_corners() || params.deform.size() != grid.num_corners()
            || params.alpha.size() != grid.num_voxels() || params.beta.size() != grid.num_voxels())
            throw std::invalid_argument("extract: parameter shapes do not match the grid");

        std::vector<VoxelId> active(active_in.begin(), active_in.end());
        if (!std::is_sorted(active.begin(), active.end())) std::sort(active.begin(), active.end());
        active.erase(std::unique(active.begin(), active.end()), active.end());
        if (!active.empty() && active.back() >= grid.num_voxels())
            throw std::invalid_argument("extract: active voxel id out of range");

        // Dual vertices, one slot per active voxel.
        std::vector<Vec3> positions(active.size());
        std::vector<std::uint8_t> mixed(active.size(), 0);
        parallel_for(active.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) mixed[i] = dual_vertex(grid, params, active[i], positions[i]) ? 1 : 0;
        });

        TriangleMesh mesh;
        std::vector<std::int32_t> vertex_of(grid.num_voxels(), -1);
        for (std::size_t i = 0; i < active.size(); ++i)
        {
            if (!mixed[i]) continue;
            vertex_of[active[i]] = static_cast<std::int32_t>(mesh.vertices.size());
            mesh.vertices.push_back(positions[i]);
            mesh.vertex_voxel.push_back(active[i]);
        }

        // Faces: every active voxel owns the three lattice edges leaving its min corner, so
        // sweeping voxels in Morton order then axis emits faces in increasing edge id.
        const std::size_t workers = std::max(1, num_threads());
        const std::size_t chunk = std::max<std::size_t>(1024, (active.size() + workers - 1) / workers);
        const std::size_t batches = (active.size() + chunk - 1) / chunk;
        std::vector<FaceBatch> out(batches);
        parallel_for(batches, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b)
            {
                auto & batch = out[b];
                const std::size_t end = std::min(active.size(), (b + 1) * chunk);
                for (std::size_t i = b * chunk; i < end; ++i)
                {
                    const VoxelId v = active[i];
                    if (!mixed[i]) continue;
                    const auto & corners = grid.corners(v);
                    const double s_lo = params.sdf[corners[0]];
                    for (int axis = 0; axis < 3; ++axis)
                    {
                        const double s_hi = params.sdf[corners[1 << axis]];
                        if (is_positive(s_lo) == is_positive(s_hi)) continue;
                        const LatticeEdge edge{grid.voxel(v), axis};
                        const auto ring = edge_ring(grid, edge);
                        std::array<std::uint32_t, 4> q{};
                        bool complete = true;
                        for (int r = 0; r < 4 && complete; ++r)
                        {
                            if (!ring[r] || vertex_of[*ring[r]] < 0) complete = false;
                            else q[r] = static_cast<std::uint32_t>(vertex_of[*ring[r]]);
                        }
                        if (!complete) continue;
                        // Ring order is counter-clockwise about +axis; flip so normals point
                        // from the negative side to the positive side.
                        if (!is_positive(s_lo))
                        {
                            batch.triangles.push_back({q[0], q[1], q[2]});
                            batch.triangles.push_back({q[0], q[2], q[3]});
                        }
                        else
                        {
                            batch.triangles.push_back({q[0], q[3], q[2]});
                            batch.triangles.push_back({q[0], q[2], q[1]});
                        }
                        const EdgeId id = edge.id();
                        batch.edges.push_back(id);
                        batch.edges.push_back(id);
                    }
                }
            }
        }, 1);

        for (auto & batch : out)
        {
            mesh.triangles.insert(mesh.triangles.end(), batch.triangles.begin(), batch.triangles.end());
            mesh.face_edge.insert(mesh.face_edge.end(), batch.edges.begin(), batch.edges.end());
        }
        return mesh;
    }

    ParamGradients extract_backward(const SparseGrid & grid, const FlexParams & params, const TriangleMesh & mesh,
                                    std::span<const Vec3> d_vertices)
    {
        if (d_vertices.size() != mesh.vertices.size())
            throw std::invalid_argument("extract_backward: one gradient per mesh vertex is required");
        if (mesh.vertex_voxel.size() != mesh.vertices.size())
            throw std::logic_error("extract_backward: mesh carries no vertex provenance");

        ParamGradients grad = ParamGradients::zeros(grid);
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        {
            const VoxelId v = mesh.vertex_voxel[i];
            if (v >= grid.num_voxels()) throw std::logic_error("extract_backward: provenance voxel out of range");
            const Vec3 & g = d_vertices[i];
            if (g.isZero(0.0)) continue;

            const auto & corners = grid.corners(v);
            const auto & alpha = params.alpha[v];
            const auto & beta = params.beta[v];

            std::array<Vec3, 12> x;
            std::array<double, 12> t;
            std::array<bool, 12> crossing{};
            Vec3 sum = Vec3::Zero();
            double weight = 0.0;
            for (int e = 0; e < 12; ++e)
            {
                const auto & le = local_edges()[e];
                const double sa = params.sdf[corners[le.corner_lo]];
                const double sb = params.sdf[corners[le.corner_hi]];
                if (is_positive(sa) == is_positive(sb)) continue;
                crossing[e] = true;
                const Vec3 pa = deformed_corner(grid, params, corners[le.corner_lo]);
                const Vec3 pb = deformed_corner(grid, params, corners[le.corner_hi]);
                t[e] = crossing_t(sa, sb, alpha[le.corner_lo], alpha[le.corner_hi]);
                x[e] = pa + t[e] * (pb - pa);
                sum += beta[e] * x[e];
                weight += beta[e];
            }
            if (weight == 0.0) throw std::logic_error("extract_backward: provenance voxel has no sign change");
            const Vec3 vertex = sum / weight;

            for (int e = 0; e < 12; ++e)
            {
                if (!crossing[e]) continue;
                const auto & le = local_edges()[e];
                const CornerId ca = corners[le.corner_lo];
                const CornerId cb = corners[le.corner_hi];
                grad.d_beta[v][e] += g.dot(x[e] - vertex) / weight;

                const Vec3 gx = (beta[e] / weight) * g;
                grad.d_deform[ca] += (1.0 - t[e]) * gx;
                grad.d_deform[cb] += t[e] * gx;

                const Vec3 pa = deformed_corner(grid, params, ca);
                const Vec3 pb = deformed_corner(grid, params, cb);
                const double dt = gx.dot(pb - pa);
                const double sa = params.sdf[ca];
                const double sb = params.sdf[cb];
                const double wa = alpha[le.corner_lo] * sa;
                const double wb = alpha[le.corner_hi] * sb;
                const double denom = (wa - wb) * (wa - wb);
                const double dt_dwa = -wb / denom;
                const double dt_dwb = wa / denom;
                grad.d_sdf[ca] += dt * dt_dwa * alpha[le.corner_lo];
                grad.d_sdf[cb] += dt * dt_dwb * alpha[le.corner_hi];
                grad.d_alpha[v][le.corner_lo] += dt * dt_dwa * sa;
                grad.d_alpha[v][le.corner_hi] += dt * dt_dwb * sb;
            }
        }
        return grad;
    }
}  // namespace sparseflex
