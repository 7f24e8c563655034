#include "sparseflex/shapes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sparseflex
{
    namespace sdf
    {
        SdfFunction sphere(const Vec3 & center, double radius)
        {
            return [center, radius](const Vec3 & p) { return (p - center).norm() - radius; };
        }

        SdfFunction plane_z(double height)
        {
            return [height](const Vec3 & p) { return p.z() - height; };
        }

        SdfFunction hollow_sphere(const Vec3 & center, double r_in, double r_out)
        {
            return [center, r_in, r_out](const Vec3 & p) {
                const double r = (p - center).norm();
                return std::max(r - r_out, r_in - r);
            };
        }

        SdfFunction by_name(const std::string & name)
        {
            if (name == "sphere") return sphere(Vec3::Zero(), 0.6);
            if (name == "plane") return plane_z(0.25);
            if (name == "hollow") return hollow_sphere(Vec3::Zero(), 0.35, 0.75);
            throw std::invalid_argument("unknown analytic shape '" + name + "'");
        }
    }  // namespace sdf

    SparseGrid sign_change_grid(const SdfFunction & fn, std::uint32_t resolution, const Box & domain)
    {
        if (resolution < 1 || resolution > kMaxResolution)
            throw std::invalid_argument("grid resolution out of range");
        const std::size_t n = resolution;
        const std::size_t g = n + 1;
        const Vec3 cell = domain.extent() / static_cast<double>(n);

        // Two z-slabs of corner signs at a time.
        std::vector<std::uint8_t> lower(g * g), upper(g * g);
        auto fill = [&](std::vector<std::uint8_t> & slab, std::size_t k) {
            for (std::size_t j = 0; j < g; ++j)
                for (std::size_t i = 0; i < g; ++i)
                {
                    const Vec3 p = domain.min + Vec3(i * cell.x(), j * cell.y(), k * cell.z());
                    slab[j * g + i] = is_positive(fn(p)) ? 1 : 0;
                }
        };

        std::vector<VoxelCoord> cells;
        fill(lower, 0);
        for (std::size_t k = 0; k < n; ++k)
        {
            fill(upper, k + 1);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t i = 0; i < n; ++i)
                {
                    const int count = lower[j * g + i] + lower[j * g + i + 1] + lower[(j + 1) * g + i]
                        + lower[(j + 1) * g + i + 1] + upper[j * g + i] + upper[j * g + i + 1]
                        + upper[(j + 1) * g + i] + upper[(j + 1) * g + i + 1];
                    if (count != 0 && count != 8)
                        cells.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                         static_cast<std::uint32_t>(k)});
                }
            std::swap(lower, upper);
        }
        return build_grid(cells, resolution, domain);
    }

    FlexParams sample_params(const SparseGrid & grid, const SdfFunction & fn)
    {
        FlexParams p = FlexParams::uniform(grid, 0.0);
        for (CornerId c = 0; c < grid.num_corners(); ++c) p.sdf[c] = fn(grid.corner_position(c));
        return p;
    }

    namespace
    {
        // Rings from the north pole down to polar angle `theta_max`; optionally closed with a
        // south pole vertex.
        TriangleMesh latitude_mesh(const Vec3 & center, double radius, int stacks, int slices, double theta_max,
                                   bool close_south, bool inward)
        {
            if (stacks < 1 || slices < 3) throw std::invalid_argument("sphere tessellation too coarse");
            TriangleMesh m;
            m.vertices.push_back(center + Vec3(0, 0, radius));
            const int rings = close_south ? stacks - 1 : stacks;
            for (int r = 1; r <= rings; ++r)
            {
                const double theta = theta_max * r / stacks;
                for (int s = 0; s < slices; ++s)
                {
                    const double phi = 2.0 * std::numbers::pi * s / slices;
                    m.vertices.push_back(center
                                         + radius * Vec3(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                                                         std::cos(theta)));
                }
            }
            auto ring_vertex = [&](int r, int s) { return static_cast<std::uint32_t>(1 + (r - 1) * slices + (s % slices)); };
            auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
                if (inward) m.triangles.push_back({a, c, b});
                else m.triangles.push_back({a, b, c});
            };
            for (int s = 0; s < slices; ++s) emit(0, ring_vertex(1, s), ring_vertex(1, s + 1));
            for (int r = 1; r < rings; ++r)
                for (int s = 0; s < slices; ++s)
                {
                    emit(ring_vertex(r, s), ring_vertex(r + 1, s), ring_vertex(r + 1, s + 1));
                    emit(ring_vertex(r, s), ring_vertex(r + 1, s + 1), ring_vertex(r, s + 1));
                }
            if (close_south)
            {
                const auto south = static_cast<std::uint32_t>(m.vertices.size());
                m.vertices.push_back(center - Vec3(0, 0, radius));
                for (int s = 0; s < slices; ++s) emit(ring_vertex(rings, s), south, ring_vertex(rings, s + 1));
            }
            return m;
        }
    }  // namespace

    TriangleMesh uv_sphere(const Vec3 & center, double radius, int stacks, int slices, bool inward)
    {
        return latitude_mesh(center, radius, std::max(stacks, 2), slices, std::numbers::pi, true, inward);
    }

    TriangleMesh uv_hemisphere(const Vec3 & center, double radius, int stacks, int slices)
    {
        return latitude_mesh(center, radius, stacks, slices, 0.5 * std::numbers::pi, false, false);
    }
}  // namespace sparseflex
