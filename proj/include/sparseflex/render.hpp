#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "frustum.hpp"
#include "mesh.hpp"

namespace sparseflex
{
    inline constexpr double kBackgroundDepth = std::numeric_limits<double>::infinity();

    /// Row-major H x W image buffers. Depth is camera-space z distance along the optical axis.
    /// Normals are flat face normals in camera space, flipped toward the camera.
    struct RenderBuffers
    {
        int width = 0;
        int height = 0;
        std::vector<double> depth;
        std::vector<Vec3> normal;
        std::vector<std::uint8_t> mask;
        std::vector<std::int32_t> face_id;

        static RenderBuffers background(int height, int width);

        std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
        std::size_t memory_bytes() const
        {
            return size() * (sizeof(double) + sizeof(Vec3) + sizeof(std::uint8_t) + sizeof(std::int32_t));
        }

        /// mask == 1 <=> face_id >= 0 <=> finite depth, and unit normals on covered pixels.
        bool consistent() const;
    };

    /// Camera-space ray direction (z = -1) through the center of pixel (x, y); row 0 is the top.
    Vec3 pixel_ray(const Camera & cam, int height, int width, int x, int y);

    /// Z-buffered rasterization with pixel-center sampling. Geometry is clipped to the camera's
    /// [near, far] depth range. Equal depths resolve to the lower face id.
    RenderBuffers rasterize(const TriangleMesh & mesh, const Camera & cam, int height, int width);

    /// Vertex gradients (world space) of sum_p d_depth[p] * depth[p] + <d_normal[p], normal[p]>
    /// with the pixel-to-face assignment held fixed. The mask carries no gradient.
    std::vector<Vec3> rasterize_backward(const TriangleMesh & mesh, const Camera & cam, const RenderBuffers & buffers,
                                         std::span<const double> d_depth, std::span<const Vec3> d_normal);

    /// Depth as a single-channel little-endian PFM; background pixels keep the +inf sentinel.
    void write_depth_pfm(const std::string & path, const RenderBuffers & buffers);
    /// Normals mapped from [-1, 1] to [0, 255] as RGB; background black.
    void write_normal_png(const std::string & path, const RenderBuffers & buffers);
    void write_mask_png(const std::string & path, const RenderBuffers & buffers);
}  // namespace sparseflex
