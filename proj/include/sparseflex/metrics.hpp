#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"
#include "mesh.hpp"

namespace sparseflex
{
    /// Exact nearest-neighbour index over a fixed point set.
    class KdTree
    {
    public:
        explicit KdTree(std::vector<Vec3> points);

        struct Hit
        {
            std::uint32_t index = 0;
            double dist2 = 0.0;
        };

        /// Nearest point; ties resolve to the lowest index.
        Hit nearest(const Vec3 & q) const;
        std::size_t size() const { return points_.size(); }
        const std::vector<Vec3> & points() const { return points_; }

    private:
        struct Node
        {
            std::uint32_t begin = 0, end = 0;  // leaf range into order_
            std::int32_t left = -1, right = -1;
            int axis = -1;
            double split = 0.0;
        };

        std::int32_t build(std::uint32_t begin, std::uint32_t end);
        void search(std::int32_t node, const Vec3 & q, Hit & best) const;

        std::vector<Vec3> points_;
        std::vector<std::uint32_t> order_;
        std::vector<Node> nodes_;
    };

    /// Squared nearest-neighbour distance from each query to `target`.
    std::vector<double> nearest_dist2(const std::vector<Vec3> & queries, const KdTree & target);

    enum class ChamferNorm
    {
        SquaredL2,  // mean of squared distances
        L2,         // mean of distances
    };

    /// 0.5 * (mean_a d(a, B) + mean_b d(b, A)). Throws std::invalid_argument on an empty cloud.
    double chamfer(const PointCloud & a, const PointCloud & b, ChamferNorm norm = ChamferNorm::SquaredL2);

    /// 100 * 2PR / (P + R); precision counts points of A strictly closer than tau to B.
    double fscore(const PointCloud & a, const PointCloud & b, double tau);

    struct MetricReport
    {
        double cd_e4 = 0.0;     // squared-L2 chamfer x 1e4
        double cd_l2_e4 = 0.0;  // L2 chamfer x 1e4
        double f1_001 = 0.0;    // F-score x 1e2 at tau = 0.001
        double f1_01 = 0.0;     // F-score x 1e2 at tau = 0.01
        std::size_t samples_a = 0;
        std::size_t samples_b = 0;
        std::uint64_t seed = 0;

        std::string to_json() const;
    };

    /// All metrics from one pair of clouds, sharing the nearest-neighbour queries.
    MetricReport cloud_metrics(const PointCloud & a, const PointCloud & b);

    /// Samples `samples` points on each mesh (seeds `seed` and `seed + 1`) and scores them.
    MetricReport mesh_metrics(const TriangleMesh & a, const TriangleMesh & b, std::size_t samples = 100000,
                              std::uint64_t seed = 0);

    struct BoundaryStats
    {
        std::size_t boundary_edges = 0;
        std::size_t boundary_loops = 0;
        long long euler = 0;  // V - E + F over referenced vertices
        std::size_t components = 0;
        std::size_t nonmanifold_edges = 0;
    };

    BoundaryStats boundary_stats(const TriangleMesh & mesh);
}  // namespace sparseflex
