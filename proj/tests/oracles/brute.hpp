#pragma once
// O(n^2) and per-item reference implementations.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle
{
    inline double nearest2(const Eigen::Vector3d & p, const std::vector<Eigen::Vector3d> & set)
    {
        double best = std::numeric_limits<double>::infinity();
        for (const auto & q : set) best = std::min(best, (p - q).squaredNorm());
        return best;
    }

    inline double chamfer_sq(const std::vector<Eigen::Vector3d> & a, const std::vector<Eigen::Vector3d> & b)
    {
        double sa = 0.0, sb = 0.0;
        for (const auto & p : a) sa += nearest2(p, b);
        for (const auto & p : b) sb += nearest2(p, a);
        return 0.5 * (sa / a.size() + sb / b.size());
    }

    inline double chamfer_l2(const std::vector<Eigen::Vector3d> & a, const std::vector<Eigen::Vector3d> & b)
    {
        double sa = 0.0, sb = 0.0;
        for (const auto & p : a) sa += std::sqrt(nearest2(p, b));
        for (const auto & p : b) sb += std::sqrt(nearest2(p, a));
        return 0.5 * (sa / a.size() + sb / b.size());
    }

    inline double fscore(const std::vector<Eigen::Vector3d> & a, const std::vector<Eigen::Vector3d> & b, double tau)
    {
        std::size_t pa = 0, pb = 0;
        for (const auto & p : a) pa += std::sqrt(nearest2(p, b)) < tau;
        for (const auto & p : b) pb += std::sqrt(nearest2(p, a)) < tau;
        const double precision = static_cast<double>(pa) / a.size();
        const double recall = static_cast<double>(pb) / b.size();
        if (precision + recall == 0.0) return 0.0;
        return 100.0 * 2.0 * precision * recall / (precision + recall);
    }

    // Point inside a symmetric perspective frustum given in camera space (looking down -z).
    inline bool in_view(const Eigen::Vector3d & pc, double fov_y, double aspect, double near, double far)
    {
        const double depth = -pc.z();
        if (depth < near || depth > far) return false;
        const double ty = std::tan(0.5 * fov_y);
        return std::abs(pc.y()) <= depth * ty && std::abs(pc.x()) <= depth * ty * aspect;
    }
}  // namespace oracle
