#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <span>
#include <vector>

#include "grid.hpp"
#include "mesh.hpp"

namespace sparseflex
{
    /// Per-corner SDF and deformation, per-voxel crossing weights (alpha, one per corner)
    /// and averaging weights (beta, one per local edge). All values in world units.
    struct FlexParams
    {
        std::vector<double> sdf;
        std::vector<Vec3> deform;
        std::vector<std::array<double, 8>> alpha;
        std::vector<std::array<double, 12>> beta;

        /// s = `sdf_value`, zero deformation, unit weights.
        static FlexParams uniform(const SparseGrid & grid, double sdf_value);

        /// Throws std::invalid_argument if the shapes do not match the grid, any value is
        /// non-finite, or a weight is not strictly positive.
        void validate(const SparseGrid & grid) const;

        std::size_t memory_bytes() const
        {
            return sdf.size() * sizeof(double) + deform.size() * sizeof(Vec3)
                + alpha.size() * sizeof(alpha[0]) + beta.size() * sizeof(beta[0]);
        }

        bool operator==(const FlexParams &) const = default;
    };

    /// Reverse-mode results; same layout as FlexParams.
    struct ParamGradients
    {
        std::vector<double> d_sdf;
        std::vector<Vec3> d_deform;
        std::vector<std::array<double, 8>> d_alpha;
        std::vector<std::array<double, 12>> d_beta;

        static ParamGradients zeros(const SparseGrid & grid);
        ParamGradients & operator+=(const ParamGradients & o);
        ParamGradients & operator*=(double k);
        double max_abs() const;
    };

    /// Hard componentwise clamp of deformations to half a cell; weights floored at `min_weight`.
    void clamp_params(FlexParams & params, const SparseGrid & grid, double min_weight = 1e-3);

    /// Corner sign convention: s >= 0 counts as positive.
    inline bool is_positive(double s) { return s >= 0.0; }

    /// Interpolation parameter t = a*s_a / (a*s_a - b*s_b) of a crossing edge.
    double crossing_t(double s_a, double s_b, double alpha_a, double alpha_b);

    /// Weighted crossing point on the segment p_a -> p_b. Throws std::logic_error when the
    /// endpoint signs agree.
    Vec3 edge_crossing(const Vec3 & p_a, const Vec3 & p_b, double s_a, double s_b, double alpha_a, double alpha_b);

    /// Deformed world position of a corner.
    inline Vec3 deformed_corner(const SparseGrid & grid, const FlexParams & params, CornerId c)
    {
        return grid.corner_position(c) + params.deform[c];
    }

    /// Dual-marching-cubes extraction over every voxel of the grid.
    TriangleMesh extract(const SparseGrid & grid, const FlexParams & params);

    /// Sectional extraction: dual vertices only for `active` voxels, and a face only when all
    /// four voxels around its lattice edge are present and active. `active` may be unsorted
    /// and may contain duplicates.
    TriangleMesh extract(const SparseGrid & grid, const FlexParams & params, std::span<const VoxelId> active);

    /// Gradients of sum_i <d_vertices[i], mesh.vertices[i]> with respect to all parameters.
    /// `mesh` must come from extract on the same grid and params.
    ParamGradients extract_backward(const SparseGrid & grid, const FlexParams & params, const TriangleMesh & mesh,
                                    std::span<const Vec3> d_vertices);

    /// Binary parameter file (little-endian doubles), see docs/formats.md. Reading checks the
    /// counts against `grid` and runs FlexParams::validate.
    void write_params(std::ostream & out, const FlexParams & params);
    FlexParams read_params(std::istream & in, const SparseGrid & grid);
    void save_params(const std::string & path, const FlexParams & params);
    FlexParams load_params(const std::string & path, const SparseGrid & grid);
}  // namespace sparseflex
