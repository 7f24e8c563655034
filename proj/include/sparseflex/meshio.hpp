#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "grid.hpp"
#include "mesh.hpp"

namespace sparseflex
{
    /// Reads ASCII OBJ (v/f records; polygons fan-triangulated) or binary little-endian PLY,
    /// chosen by extension. Throws ParseError with the line (OBJ) or byte offset (PLY).
    TriangleMesh load_mesh(const std::string & path);
    TriangleMesh load_obj(std::istream & in);
    TriangleMesh load_ply(std::istream & in);

    /// Writes OBJ or PLY (binary little-endian, double coordinates) by extension.
    void save_mesh(const TriangleMesh & mesh, const std::string & path);
    void save_obj(const TriangleMesh & mesh, std::ostream & out);
    void save_ply(const TriangleMesh & mesh, std::ostream & out);

    /// p' = (p - center) * scale.
    struct NormalizeTransform
    {
        Vec3 center = Vec3::Zero();
        double scale = 1.0;

        Vec3 apply(const Vec3 & p) const { return (p - center) * scale; }
        Vec3 invert(const Vec3 & p) const { return p / scale + center; }
    };

    /// Centers the bounding box at the origin and scales the largest half-extent to 0.95.
    /// Throws std::invalid_argument for empty or zero-extent meshes.
    std::pair<TriangleMesh, NormalizeTransform> normalize_mesh(const TriangleMesh & mesh);

    TriangleMesh transformed(const TriangleMesh & mesh, const NormalizeTransform & t);

    double surface_area(const TriangleMesh & mesh);
    /// Signed enclosed volume; positive for closed, outward-wound meshes.
    double signed_volume(const TriangleMesh & mesh);

    /// Area-weighted uniform surface samples with flat face normals. Deterministic for a seed.
    /// Throws std::invalid_argument when n < 1 or the mesh has zero area.
    PointCloud sample_surface(const TriangleMesh & mesh, std::size_t n, std::uint64_t seed);

    /// The same samples as sample_surface with their faces and barycentric coordinates
    /// (weights of vertices 1 and 2; vertex 0 gets the rest).
    struct SurfaceSamples
    {
        PointCloud cloud;
        std::vector<std::uint32_t> face;
        std::vector<std::array<double, 2>> bary;
    };
    SurfaceSamples sample_surface_with_faces(const TriangleMesh & mesh, std::size_t n, std::uint64_t seed);

    /// Feature of a triangle holding a closest point.
    enum class TriFeature
    {
        Face,
        VertexA,
        VertexB,
        VertexC,
        EdgeAB,
        EdgeBC,
        EdgeCA,
    };

    /// Closest point to p on triangle (a, b, c).
    Vec3 closest_point_on_triangle(const Vec3 & p, const Vec3 & a, const Vec3 & b, const Vec3 & c,
                                   TriFeature * feature = nullptr);

    /// Unsigned distance from p to the nearest face (linear scan).
    double distance_to_mesh(const Vec3 & p, const TriangleMesh & mesh);

    /// Cells whose center lies within `band` cell widths (largest axis) of the mesh surface.
    /// band >= sqrt(3)/2 includes every cell the surface touches. With `trim_boundary`, cells
    /// whose nearest surface point lies on an open boundary (an edge with one incident face,
    /// or a vertex on such an edge) are left out, so the band ends at the rim of open surfaces
    /// instead of wrapping around it. Closed meshes are unaffected.
    SparseGrid voxelize_mesh(const TriangleMesh & mesh, std::uint32_t resolution, const Box & domain = {}, double band = 1.0,
                             bool trim_boundary = true);

    /// Whitespace-separated "x y z [nx ny nz]" lines.
    void save_points(const PointCloud & pc, const std::string & path);
    PointCloud load_points(const std::string & path);
}  // namespace sparseflex
