#pragma once

#include <functional>
#include <string>

#include "flexicubes.hpp"
#include "grid.hpp"
#include "mesh.hpp"

namespace sparseflex
{
    /// Signed distance, negative inside.
    using SdfFunction = std::function<double(const Vec3 &)>;

    namespace sdf
    {
        SdfFunction sphere(const Vec3 & center, double radius);
        /// s = z - height.
        SdfFunction plane_z(double height);
        /// Solid between two concentric spheres (inside where r_in < |p - c| < r_out).
        SdfFunction hollow_sphere(const Vec3 & center, double r_in, double r_out);

        /// Named shapes used by the CLI and benchmarks: "sphere" (r=0.6), "plane" (z=0.25),
        /// "hollow" (radii 0.35 / 0.75). Throws std::invalid_argument for unknown names.
        SdfFunction by_name(const std::string & name);
    }  // namespace sdf

    /// Every cell of the N_r^3 lattice whose eight corner values have mixed signs.
    SparseGrid sign_change_grid(const SdfFunction & fn, std::uint32_t resolution, const Box & domain = {});

    /// Corner SDF sampled from `fn`; zero deformation; unit weights.
    FlexParams sample_params(const SparseGrid & grid, const SdfFunction & fn);

    /// Latitude/longitude sphere. `inward` reverses the winding.
    TriangleMesh uv_sphere(const Vec3 & center, double radius, int stacks, int slices, bool inward = false);

    /// Upper half (z >= center.z) of a uv_sphere, rim exactly on the equator.
    TriangleMesh uv_hemisphere(const Vec3 & center, double radius, int stacks, int slices);
}  // namespace sparseflex
