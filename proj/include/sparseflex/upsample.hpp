#pragma once

#include <utility>
#include <vector>

#include "grid.hpp"

namespace sparseflex
{
    /// Parent/child relation produced by subdivide. Children of parent p are
    /// children[offsets[p] .. offsets[p + 1]) (child voxel ids, ascending).
    struct SubdivisionMap
    {
        std::uint32_t factor = 2;
        std::vector<std::uint32_t> offsets;
        std::vector<VoxelId> children;
        std::vector<VoxelId> parent_of;  // indexed by child id
    };

    /// Splits every voxel into factor^3 children on a factor * N_r lattice over the same domain.
    /// Throws std::invalid_argument for factor < 2 and std::out_of_range when the fine
    /// resolution exceeds kMaxResolution.
    std::pair<SparseGrid, SubdivisionMap> subdivide(const SparseGrid & grid, std::uint32_t factor);

    /// 1 for each child cell that contains at least one point (same cell convention as
    /// voxelize_points). Points outside the domain raise std::out_of_range.
    std::vector<std::uint8_t> gt_occupancy(const SparseGrid & children, const PointCloud & pc);

    /// Keeps the children flagged in `occupied`.
    SparseGrid self_prune(const SparseGrid & children, const std::vector<std::uint8_t> & occupied);
}  // namespace sparseflex
