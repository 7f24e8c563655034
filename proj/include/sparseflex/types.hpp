#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sparseflex
{
    using Vec3 = Eigen::Vector3d;
    using Vec4 = Eigen::Vector4d;
    using Mat3 = Eigen::Matrix3d;
    using Mat4 = Eigen::Matrix4d;

    using VoxelId = std::uint32_t;
    using CornerId = std::uint32_t;
    using EdgeId = std::uint64_t;

    /// Axis-aligned box in world units.
    struct Box
    {
        Vec3 min = Vec3::Constant(-1.0);
        Vec3 max = Vec3::Constant(1.0);

        Vec3 extent() const { return max - min; }
        Vec3 center() const { return 0.5 * (min + max); }
        double diagonal() const { return extent().norm(); }

        bool contains(const Vec3 & p) const
        {
            return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
        }

        bool operator==(const Box & o) const { return min == o.min && max == o.max; }
    };

    /// Malformed input file. Carries the line (text formats) or byte offset (binary formats).
    class ParseError : public std::runtime_error
    {
    public:
        ParseError(const std::string & what, std::size_t location)
            : std::runtime_error(what + " (at " + std::to_string(location) + ")"), location_(location) {}

        std::size_t location() const { return location_; }

    private:
        std::size_t location_;
    };

    /// Raised when an optimization produces a non-finite loss.
    class NumericalError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class IoError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };
}  // namespace sparseflex
