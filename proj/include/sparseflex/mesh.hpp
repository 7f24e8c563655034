#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "types.hpp"

namespace sparseflex
{
    using Triangle = std::array<std::uint32_t, 3>;

    /// Indexed triangle mesh. Meshes produced by extraction also carry provenance:
    /// the lattice edge that generated each face and the voxel that generated each vertex.
    /// Meshes loaded from disk leave both provenance vectors empty.
    struct TriangleMesh
    {
        std::vector<Vec3> vertices;
        std::vector<Triangle> triangles;
        std::vector<EdgeId> face_edge;
        std::vector<VoxelId> vertex_voxel;

        std::size_t num_vertices() const { return vertices.size(); }
        std::size_t num_faces() const { return triangles.size(); }
        bool empty() const { return triangles.empty(); }
        bool has_provenance() const { return !face_edge.empty() || !vertex_voxel.empty(); }

        /// Throws std::invalid_argument on out-of-range indices, repeated vertex ids in a
        /// triangle, or provenance vectors of the wrong length.
        void validate() const;

        std::size_t memory_bytes() const
        {
            return vertices.size() * sizeof(Vec3) + triangles.size() * sizeof(Triangle)
                + face_edge.size() * sizeof(EdgeId) + vertex_voxel.size() * sizeof(VoxelId);
        }
    };

    /// Concatenates meshes, dropping provenance unless every input has it.
    TriangleMesh merge(const std::vector<TriangleMesh> & parts);
}  // namespace sparseflex
