#include "sparseflex/mesh.hpp"

#include <stdexcept>

namespace sparseflex
{
    void TriangleMesh::validate() const
    {
        const auto nv = vertices.size();
        for (const auto & t : triangles)
        {
            if (t[0] >= nv || t[1] >= nv || t[2] >= nv)
                throw std::invalid_argument("triangle references a missing vertex");
            if (t[0] == t[1] && t[1] == t[2])
                throw std::invalid_argument("triangle repeats a single vertex");
        }
        if (!face_edge.empty() && face_edge.size() != triangles.size())
            throw std::invalid_argument("face provenance length differs from triangle count");
        if (!vertex_voxel.empty() && vertex_voxel.size() != vertices.size())
            throw std::invalid_argument("vertex provenance length differs from vertex count");
    }

    TriangleMesh merge(const std::vector<TriangleMesh> & parts)
    {
        TriangleMesh out;
        bool provenance = !parts.empty();
        for (const auto & p : parts)
            provenance = provenance && p.face_edge.size() == p.triangles.size() && p.vertex_voxel.size() == p.vertices.size();
        for (const auto & p : parts)
        {
            const auto base = static_cast<std::uint32_t>(out.vertices.size());
            out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
            for (const auto & t : p.triangles) out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
            if (provenance)
            {
                out.face_edge.insert(out.face_edge.end(), p.face_edge.begin(), p.face_edge.end());
                out.vertex_voxel.insert(out.vertex_voxel.end(), p.vertex_voxel.begin(), p.vertex_voxel.end());
            }
        }
        return out;
    }
}  // namespace sparseflex
