#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "types.hpp"

namespace sparseflex
{
    /// Largest supported resolution. Keeps corner Morton codes below 2^60 so that
    /// lattice edge ids (code * 3 + axis) fit in 64 bits.
    inline constexpr std::uint32_t kMaxResolution = 1u << 19;

    struct VoxelCoord
    {
        std::uint32_t i = 0, j = 0, k = 0;

        std::uint32_t operator[](int axis) const { return axis == 0 ? i : (axis == 1 ? j : k); }
        std::uint32_t & operator[](int axis) { return axis == 0 ? i : (axis == 1 ? j : k); }
        bool operator==(const VoxelCoord &) const = default;
    };

    struct PointCloud
    {
        std::vector<Vec3> points;
        std::vector<Vec3> normals;  // empty or same length as points

        std::size_t size() const { return points.size(); }
        bool empty() const { return points.empty(); }
        bool has_normals() const { return !normals.empty(); }

        /// Throws std::invalid_argument if normals are present but mismatched or not unit length.
        void validate() const;
    };

    /// Lattice edge between two corner points that differ by one step along `axis`.
    /// `origin` is the lower endpoint; every coordinate lies in [0, N_r].
    struct LatticeEdge
    {
        VoxelCoord origin;
        int axis = 0;

        EdgeId id() const;
        static LatticeEdge from_id(EdgeId id);

        /// Throws std::invalid_argument unless a and b are lattice neighbours inside [0, N_r]^3.
        static LatticeEdge from_corners(const VoxelCoord & a, const VoxelCoord & b, std::uint32_t resolution);

        bool operator==(const LatticeEdge &) const = default;
    };

    /// Sparse set of voxels on an N_r^3 lattice over a box, with a shared corner table.
    ///
    /// Voxels are kept in strictly increasing Morton order. Corner ids are assigned in
    /// first-touch order while sweeping voxels in that order, visiting each voxel's
    /// corners by local index c = x + 2y + 4z. Immutable once built.
    class SparseGrid
    {
    public:
        SparseGrid() = default;

        std::uint32_t resolution() const { return resolution_; }
        const Box & domain() const { return domain_; }
        Vec3 cell_size() const { return domain_.extent() / static_cast<double>(resolution_); }

        std::size_t num_voxels() const { return voxels_.size(); }
        std::size_t num_corners() const { return corner_coords_.size(); }
        bool empty() const { return voxels_.empty(); }

        const std::vector<VoxelCoord> & voxels() const { return voxels_; }
        const VoxelCoord & voxel(VoxelId v) const { return voxels_[v]; }
        std::uint64_t code(VoxelId v) const { return codes_[v]; }
        const std::array<CornerId, 8> & corners(VoxelId v) const { return voxel_corners_[v]; }
        const VoxelCoord & corner_coord(CornerId c) const { return corner_coords_[c]; }

        Vec3 voxel_center(VoxelId v) const;
        /// Undeformed world position of a corner.
        Vec3 corner_position(CornerId c) const;
        Vec3 lattice_point(const VoxelCoord & p) const;

        std::optional<VoxelId> find(const VoxelCoord & c) const;
        std::optional<VoxelId> find(std::int64_t i, std::int64_t j, std::int64_t k) const;

        /// Bytes held by the voxel list, codes, corner table, and corner coordinates.
        std::size_t memory_bytes() const;

        bool operator==(const SparseGrid & o) const
        {
            return resolution_ == o.resolution_ && domain_ == o.domain_ && voxels_ == o.voxels_
                && voxel_corners_ == o.voxel_corners_ && corner_coords_ == o.corner_coords_;
        }

    private:
        friend SparseGrid build_grid(std::span<const VoxelCoord>, std::uint32_t, const Box &);

        std::uint32_t resolution_ = 1;
        Box domain_;
        std::vector<VoxelCoord> voxels_;
        std::vector<std::uint64_t> codes_;
        std::vector<std::array<CornerId, 8>> voxel_corners_;
        std::vector<VoxelCoord> corner_coords_;
    };

    /// Deduplicates, Morton-sorts, and builds the shared corner table.
    /// Throws std::invalid_argument for a bad resolution and std::out_of_range for coordinates
    /// outside [0, N_r)^3.
    SparseGrid build_grid(std::span<const VoxelCoord> coords, std::uint32_t resolution, const Box & domain = {});

    /// Cell containing p under the half-open convention, with points on the max face clamped
    /// into the last cell. Throws std::out_of_range for points outside the domain.
    VoxelCoord cell_of(const Vec3 & p, std::uint32_t resolution, const Box & domain);

    /// Voxels containing at least one point.
    SparseGrid voxelize_points(const PointCloud & pc, std::uint32_t resolution, const Box & domain = {});

    /// Grid of the listed voxels of `grid` (ids need not be sorted). Voxel order and corner
    /// numbering follow the usual canonical rules for the new grid.
    SparseGrid subset(const SparseGrid & grid, std::span<const VoxelId> ids);

    /// Voxels present among the (up to four) cells sharing `edge`, in rotational order
    /// (+u+v, -u+v, -u-v, +u-v) around the edge axis with (u, v) = (axis+1, axis+2) mod 3.
    /// The cell offsets are relative to the edge; absent cells are skipped.
    std::vector<VoxelId> edge_adjacent_voxels(const SparseGrid & grid, const LatticeEdge & edge);

    /// The four cells around an edge in rotational order; entries are nullopt when the cell
    /// is outside the lattice or missing from the grid.
    std::array<std::optional<VoxelId>, 4> edge_ring(const SparseGrid & grid, const LatticeEdge & edge);

    /// Local corner index pairs for the 12 voxel edges. Edge e = 4 * axis + bu + 2 * bv.
    struct LocalEdge
    {
        int axis;
        int corner_lo;
        int corner_hi;
    };
    const std::array<LocalEdge, 12> & local_edges();

    /// Sorted ids of `ids` plus every grid voxel within `rings` steps (26-neighbourhood).
    std::vector<VoxelId> dilate(const SparseGrid & grid, std::span<const VoxelId> ids, int rings = 1);

    /// Unique (lower, upper) corner id pairs joined by a voxel edge, sorted.
    std::vector<std::array<CornerId, 2>> corner_edge_pairs(const SparseGrid & grid);

    // Serialization: see docs/formats.md.
    void write_grid(std::ostream & out, const SparseGrid & grid);
    SparseGrid read_grid(std::istream & in);
    void save_grid(const std::string & path, const SparseGrid & grid);
    SparseGrid load_grid(const std::string & path);
}  // namespace sparseflex
