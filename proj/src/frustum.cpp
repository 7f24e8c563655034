#include "sparseflex/frustum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sparseflex/parallel.hpp"

namespace sparseflex
{
    Camera Camera::look_at(const Vec3 & eye, const Vec3 & target, const Vec3 & up, double fov_y, double aspect,
                           double near, double far)
    {
        const Vec3 forward = (target - eye).normalized();
        Vec3 right = forward.cross(up);
        if (right.norm() < 1e-12) throw std::invalid_argument("look_at: up vector is parallel to the view direction");
        right.normalize();
        const Vec3 true_up = right.cross(forward);

        Camera cam;
        Mat3 r;
        r.row(0) = right;
        r.row(1) = true_up;
        r.row(2) = -forward;
        cam.world_to_camera.setIdentity();
        cam.world_to_camera.topLeftCorner<3, 3>() = r;
        cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
        cam.fov_y = fov_y;
        cam.aspect = aspect;
        cam.near = near;
        cam.far = far;
        return cam;
    }

    Vec3 Camera::position() const
    {
        return -rotation().transpose() * world_to_camera.topRightCorner<3, 1>();
    }

    void Camera::validate() const
    {
        if (!world_to_camera.allFinite()) throw std::invalid_argument("camera: non-finite extrinsics");
        const Mat3 r = rotation();
        if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
            throw std::invalid_argument("camera: rotation is not orthonormal");
        if (std::abs(r.determinant() - 1.0) > 1e-9) throw std::invalid_argument("camera: rotation determinant is not +1");
        if (world_to_camera.row(3) != Vec4(0, 0, 0, 1).transpose())
            throw std::invalid_argument("camera: extrinsics bottom row must be (0, 0, 0, 1)");
        if (!(near > 0.0) || !(far > near)) throw std::invalid_argument("camera: require 0 < near < far");
        if (!(fov_y > 0.0) || !(fov_y < std::numbers::pi)) throw std::invalid_argument("camera: fov must be in (0, pi)");
        if (!(aspect > 0.0)) throw std::invalid_argument("camera: aspect must be positive");
    }

    Mat4 projection(const Camera & cam)
    {
        const double f = 1.0 / std::tan(0.5 * cam.fov_y);
        Mat4 p = Mat4::Zero();
        p(0, 0) = f / cam.aspect;
        p(1, 1) = f;
        p(2, 2) = (cam.far + cam.near) / (cam.near - cam.far);
        p(2, 3) = 2.0 * cam.far * cam.near / (cam.near - cam.far);
        p(3, 2) = -1.0;
        return p;
    }

    Mat4 mvp(const Camera & cam)
    {
        cam.validate();
        return projection(cam) * cam.world_to_camera;
    }

    bool in_frustum(const Mat4 & m, const Vec3 & p)
    {
        const Vec4 c = m * Vec4(p.x(), p.y(), p.z(), 1.0);
        const double w = c.w();
        return w > 0.0 && -w <= c.x() && c.x() <= w && -w <= c.y() && c.y() <= w && -w <= c.z() && c.z() <= w;
    }

    std::vector<VoxelId> active_voxels(const SparseGrid & grid, const Mat4 & m, Containment mode)
    {
        std::vector<std::uint8_t> flag(grid.num_voxels(), 0);
        parallel_for(grid.num_voxels(), [&](std::size_t b, std::size_t e) {
            for (std::size_t v = b; v < e; ++v)
            {
                bool inside = in_frustum(m, grid.voxel_center(static_cast<VoxelId>(v)));
                if (!inside && mode == Containment::Conservative)
                    for (const CornerId c : grid.corners(static_cast<VoxelId>(v)))
                        if (in_frustum(m, grid.corner_position(c)))
                        {
                            inside = true;
                            break;
                        }
                flag[v] = inside ? 1 : 0;
            }
        });
        std::vector<VoxelId> out;
        for (VoxelId v = 0; v < flag.size(); ++v)
            if (flag[v]) out.push_back(v);
        return out;
    }

    Camera with_planes(Camera cam, double near, double far)
    {
        cam.near = near;
        cam.far = far;
        return cam;
    }

    FrustumResult adapt_frustum(const SparseGrid & grid, const Camera & cam, double ratio, const AdaptOptions & opts)
    {
        if (!(ratio > 0.0) || ratio > 1.0) throw std::invalid_argument("visibility ratio must be in (0, 1]");
        if (opts.max_iter < 1) throw std::invalid_argument("adapt_frustum: max_iter must be at least 1");
        if (!(opts.tol >= 0.0)) throw std::invalid_argument("adapt_frustum: tol must be nonnegative");
        cam.validate();

        const double nv = static_cast<double>(grid.num_voxels());
        const double target = ratio * nv;
        const double lo_count = (ratio - opts.tol) * nv;
        const double hi_count = (ratio + opts.tol) * nv;
        constexpr double kEps = 1e-6;

        FrustumResult best;
        best.near = cam.near;
        best.far = cam.far;
        double best_gap = std::numeric_limits<double>::infinity();
        int iterations = 0;

        auto evaluate = [&](double near, double far) {
            ++iterations;
            auto active = active_voxels(grid, mvp(with_planes(cam, near, far)), opts.mode);
            const double count = static_cast<double>(active.size());
            const double gap = std::abs(count - target);
            const bool hit = count >= lo_count && count <= hi_count;
            if (gap < best_gap || (hit && !best.reached))
            {
                best_gap = gap;
                best.active = std::move(active);
                best.near = near;
                best.far = far;
                best.reached = hit;
            }
            return count;
        };
        auto in_band = [&](double count) { return count >= lo_count && count <= hi_count; };

        const Vec3 eye = cam.position();
        double far_max = 0.0;
        for (int corner = 0; corner < 8; ++corner)
        {
            const Vec3 p((corner & 1) ? grid.domain().max.x() : grid.domain().min.x(),
                         (corner & 2) ? grid.domain().max.y() : grid.domain().min.y(),
                         (corner & 4) ? grid.domain().max.z() : grid.domain().min.z());
            far_max = std::max(far_max, (p - eye).norm());
        }
        far_max = std::max(far_max, cam.near + 2.0 * kEps);

        double count = evaluate(cam.near, far_max);
        if (!in_band(count))
        {
            if (count > hi_count)
            {
                double lo = cam.near + kEps;
                double hi = far_max;
                while (iterations < opts.max_iter)
                {
                    const double mid = 0.5 * (lo + hi);
                    count = evaluate(cam.near, mid);
                    if (in_band(count)) break;
                    if (count > hi_count) hi = mid;
                    else lo = mid;
                }
            }
            else
            {
                double lo = kEps;  // more voxels
                double hi = cam.near;
                while (iterations < opts.max_iter)
                {
                    const double mid = 0.5 * (lo + hi);
                    count = evaluate(mid, far_max);
                    if (in_band(count)) break;
                    if (count < lo_count) hi = mid;
                    else lo = mid;
                }
            }
        }

        best.iterations = iterations;
        best.achieved_ratio = nv > 0 ? static_cast<double>(best.active.size()) / nv : 0.0;
        return best;
    }

    namespace
    {
        Vec3 vec3_from(const nlohmann::json & j, const char * key)
        {
            const auto & a = j.at(key);
            if (!a.is_array() || a.size() != 3) throw std::invalid_argument(std::string("camera: '") + key + "' must be a 3-vector");
            return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
        }
    }  // namespace

    Camera parse_camera(const std::string & json_text)
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(json_text);
        }
        catch (const nlohmann::json::parse_error & e)
        {
            throw ParseError(std::string("camera file: ") + e.what(), e.byte);
        }
        if (!j.is_object()) throw std::invalid_argument("camera file must hold a JSON object");
        static const char * kKeys[] = {"position", "look_at", "up", "world_to_camera", "fov_deg", "aspect", "near", "far"};
        for (const auto & [key, value] : j.items())
            if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char * k) { return key == k; }) == std::end(kKeys))
                throw std::invalid_argument("camera file: unknown key '" + key + "'");

        try
        {
            const double fov = j.value("fov_deg", 60.0) * std::numbers::pi / 180.0;
            const double aspect = j.value("aspect", 1.0);
            const double near = j.value("near", 0.1);
            const double far = j.value("far", 10.0);
            Camera cam;
            if (j.contains("world_to_camera"))
            {
                if (j.contains("position") || j.contains("look_at"))
                    throw std::invalid_argument("camera file: give either world_to_camera or position/look_at");
                const auto & rows = j.at("world_to_camera");
                if (!rows.is_array() || rows.size() != 4) throw std::invalid_argument("camera file: world_to_camera must be 4x4");
                for (int r = 0; r < 4; ++r)
                {
                    if (!rows[r].is_array() || rows[r].size() != 4)
                        throw std::invalid_argument("camera file: world_to_camera must be 4x4");
                    for (int c = 0; c < 4; ++c) cam.world_to_camera(r, c) = rows[r][c].get<double>();
                }
                cam.fov_y = fov;
                cam.aspect = aspect;
                cam.near = near;
                cam.far = far;
            }
            else
            {
                const Vec3 up = j.contains("up") ? vec3_from(j, "up") : Vec3(0, 0, 1);
                cam = Camera::look_at(vec3_from(j, "position"), vec3_from(j, "look_at"), up, fov, aspect, near, far);
            }
            cam.validate();
            return cam;
        }
        catch (const nlohmann::json::exception & e)
        {
            throw std::invalid_argument(std::string("camera file: ") + e.what());
        }
    }

    Camera load_camera(const std::string & path)
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open camera file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_camera(ss.str());
    }

    std::string camera_to_json(const Camera & cam)
    {
        nlohmann::json j;
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < 4; ++r)
        {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < 4; ++c) row.push_back(cam.world_to_camera(r, c));
            rows.push_back(row);
        }
        j["world_to_camera"] = rows;
        j["fov_deg"] = cam.fov_y * 180.0 / std::numbers::pi;
        j["aspect"] = cam.aspect;
        j["near"] = cam.near;
        j["far"] = cam.far;
        return j.dump(2);
    }
}  // namespace sparseflex
