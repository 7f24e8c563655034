#include "sparseflex/upsample.hpp"

#include <stdexcept>

namespace sparseflex
{
    std::pair<SparseGrid, SubdivisionMap> subdivide(const SparseGrid & grid, std::uint32_t factor)
    {
        if (factor < 2) throw std::invalid_argument("subdivision factor must be at least 2");
        const std::uint64_t fine = static_cast<std::uint64_t>(grid.resolution()) * factor;
        if (fine > kMaxResolution) throw std::out_of_range("subdivided resolution exceeds the supported maximum");

        std::vector<VoxelCoord> coords;
        coords.reserve(grid.num_voxels() * factor * factor * factor);
        for (const auto & p : grid.voxels())
            for (std::uint32_t dz = 0; dz < factor; ++dz)
                for (std::uint32_t dy = 0; dy < factor; ++dy)
                    for (std::uint32_t dx = 0; dx < factor; ++dx)
                        coords.push_back({p.i * factor + dx, p.j * factor + dy, p.k * factor + dz});
        SparseGrid children = build_grid(coords, static_cast<std::uint32_t>(fine), grid.domain());

        SubdivisionMap map;
        map.factor = factor;
        map.parent_of.resize(children.num_voxels());
        std::vector<std::uint32_t> counts(grid.num_voxels() + 1, 0);
        for (VoxelId c = 0; c < children.num_voxels(); ++c)
        {
            const auto & v = children.voxel(c);
            const auto parent = grid.find(VoxelCoord{v.i / factor, v.j / factor, v.k / factor});
            map.parent_of[c] = *parent;
            ++counts[*parent + 1];
        }
        for (std::size_t p = 1; p < counts.size(); ++p) counts[p] += counts[p - 1];
        map.offsets = counts;
        map.children.resize(children.num_voxels());
        std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
        for (VoxelId c = 0; c < children.num_voxels(); ++c) map.children[cursor[map.parent_of[c]]++] = c;
        return {std::move(children), std::move(map)};
    }

    std::vector<std::uint8_t> gt_occupancy(const SparseGrid & children, const PointCloud & pc)
    {
        std::vector<std::uint8_t> occ(children.num_voxels(), 0);
        for (const auto & p : pc.points)
        {
            const auto cell = cell_of(p, children.resolution(), children.domain());
            if (const auto id = children.find(cell)) occ[*id] = 1;
        }
        return occ;
    }

    SparseGrid self_prune(const SparseGrid & children, const std::vector<std::uint8_t> & occupied)
    {
        if (occupied.size() != children.num_voxels()) throw std::invalid_argument("self_prune: occupancy length mismatch");
        std::vector<VoxelId> keep;
        for (VoxelId v = 0; v < occupied.size(); ++v)
            if (occupied[v]) keep.push_back(v);
        return subset(children, keep);
    }
}  // namespace sparseflex
