#pragma once

#include <string>
#include <vector>

#include "grid.hpp"

namespace sparseflex
{
    /// Pinhole camera looking down its local -z axis (OpenGL convention).
    struct Camera
    {
        Mat4 world_to_camera = Mat4::Identity();  // rigid transform
        double fov_y = 1.0471975511965976;        // radians
        double aspect = 1.0;                      // width / height
        double near = 0.1;
        double far = 10.0;

        static Camera look_at(const Vec3 & eye, const Vec3 & target, const Vec3 & up, double fov_y, double aspect,
                              double near, double far);

        Vec3 position() const;
        Mat3 rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
        Vec3 to_camera(const Vec3 & p) const { return rotation() * p + world_to_camera.topRightCorner<3, 1>(); }

        /// Throws std::invalid_argument unless the rotation is orthonormal (1e-9) with det +1,
        /// 0 < near < far, 0 < fov_y < pi, and aspect > 0.
        void validate() const;
    };

    /// Perspective projection mapping the view frustum onto the clip cube [-1,1]^3.
    Mat4 projection(const Camera & cam);

    /// projection(cam) * world_to_camera. Validates the camera.
    Mat4 mvp(const Camera & cam);

    /// w > 0 and -w <= x, y, z <= w for (x, y, z, w) = M * (p, 1).
    bool in_frustum(const Mat4 & m, const Vec3 & p);

    enum class Containment
    {
        Center,        // voxel center inside the frustum
        Conservative,  // center or any of the eight corners inside
    };

    /// Sorted ids of voxels passing the containment test.
    std::vector<VoxelId> active_voxels(const SparseGrid & grid, const Mat4 & m, Containment mode = Containment::Center);

    struct FrustumResult
    {
        std::vector<VoxelId> active;
        double achieved_ratio = 0.0;
        double near = 0.0;
        double far = 0.0;
        int iterations = 0;
        bool reached = false;  // false: best-effort iterate, target band not hit
    };

    struct AdaptOptions
    {
        double tol = 0.02;
        int max_iter = 32;
        Containment mode = Containment::Center;
    };

    /// Adjusts the clip planes of `cam` so that about ratio * N_v voxels are active. The far
    /// plane is bisected first with the near plane fixed; if even the largest useful far plane
    /// leaves too few voxels, the near plane is bisected toward zero. Returns the closest
    /// iterate when the band [ratio - tol, ratio + tol] cannot be reached.
    FrustumResult adapt_frustum(const SparseGrid & grid, const Camera & cam, double ratio, const AdaptOptions & opts = {});

    Camera with_planes(Camera cam, double near, double far);

    /// Camera description file (JSON), see docs/formats.md.
    Camera parse_camera(const std::string & json_text);
    Camera load_camera(const std::string & path);
    std::string camera_to_json(const Camera & cam);
}  // namespace sparseflex
