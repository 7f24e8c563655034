#include "sparseflex/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "sparseflex/meshio.hpp"
#include "sparseflex/parallel.hpp"

namespace sparseflex
{
    namespace
    {
        constexpr std::uint32_t kLeafSize = 8;

        struct UnionFind
        {
            std::vector<std::uint32_t> parent;
            explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
            std::uint32_t find(std::uint32_t x)
            {
                while (parent[x] != x) x = parent[x] = parent[parent[x]];
                return x;
            }
            void unite(std::uint32_t a, std::uint32_t b)
            {
                a = find(a);
                b = find(b);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
        };

        void require_nonempty(const PointCloud & a, const PointCloud & b)
        {
            if (a.empty() || b.empty()) throw std::invalid_argument("metrics need two non-empty point clouds");
        }

        double mean(const std::vector<double> & v, bool take_sqrt)
        {
            double s = 0.0;
            for (double x : v) s += take_sqrt ? std::sqrt(x) : x;
            return s / static_cast<double>(v.size());
        }

        double f_from(const std::vector<double> & d_ab, const std::vector<double> & d_ba, double tau)
        {
            const double t2 = tau * tau;
            auto frac = [&](const std::vector<double> & d) {
                std::size_t n = 0;
                for (double x : d) n += x < t2;
                return static_cast<double>(n) / static_cast<double>(d.size());
            };
            const double p = frac(d_ab), r = frac(d_ba);
            return p + r > 0.0 ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
        }
    }  // namespace

    KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points))
    {
        if (points_.empty()) throw std::invalid_argument("KdTree: empty point set");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }

    std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end)
    {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({begin, end, -1, -1, -1, 0.0});
        if (end - begin <= kLeafSize) return id;

        Vec3 lo = points_[order_[begin]], hi = lo;
        for (auto i = begin; i < end; ++i)
        {
            lo = lo.cwiseMin(points_[order_[i]]);
            hi = hi.cwiseMax(points_[order_[i]]);
        }
        int axis;
        (hi - lo).maxCoeff(&axis);
        if (hi[axis] == lo[axis]) return id;  // all coincident

        const auto mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double pa = points_[a][axis], pb = points_[b][axis];
                             return pa < pb || (pa == pb && a < b);
                         });
        const double split = points_[order_[mid]][axis];
        const auto left = build(begin, mid);
        const auto right = build(mid, end);
        auto & n = nodes_[id];
        n.axis = axis;
        n.split = split;
        n.left = left;
        n.right = right;
        return id;
    }

    void KdTree::search(std::int32_t id, const Vec3 & q, Hit & best) const
    {
        const Node & n = nodes_[id];
        if (n.axis < 0)
        {
            for (auto i = n.begin; i < n.end; ++i)
            {
                const auto idx = order_[i];
                const double d2 = (points_[idx] - q).squaredNorm();
                if (d2 < best.dist2 || (d2 == best.dist2 && idx < best.index)) best = {idx, d2};
            }
            return;
        }
        // Left holds coordinates <= split, right holds coordinates >= split.
        const double diff = q[n.axis] - n.split;
        const auto near_side = diff < 0.0 ? n.left : n.right;
        const auto far_side = diff < 0.0 ? n.right : n.left;
        search(near_side, q, best);
        if (diff * diff <= best.dist2) search(far_side, q, best);
    }

    KdTree::Hit KdTree::nearest(const Vec3 & q) const
    {
        Hit best{std::numeric_limits<std::uint32_t>::max(), std::numeric_limits<double>::infinity()};
        search(0, q, best);
        return best;
    }

    std::vector<double> nearest_dist2(const std::vector<Vec3> & queries, const KdTree & target)
    {
        std::vector<double> out(queries.size());
        parallel_for(queries.size(), [&](std::size_t b, std::size_t e) {
            for (auto i = b; i < e; ++i) out[i] = target.nearest(queries[i]).dist2;
        }, 256);
        return out;
    }

    double chamfer(const PointCloud & a, const PointCloud & b, ChamferNorm norm)
    {
        require_nonempty(a, b);
        const KdTree ta(a.points), tb(b.points);
        const bool l2 = norm == ChamferNorm::L2;
        return 0.5 * (mean(nearest_dist2(a.points, tb), l2) + mean(nearest_dist2(b.points, ta), l2));
    }

    double fscore(const PointCloud & a, const PointCloud & b, double tau)
    {
        require_nonempty(a, b);
        if (!(tau > 0.0)) throw std::invalid_argument("fscore: threshold must be positive");
        const KdTree ta(a.points), tb(b.points);
        return f_from(nearest_dist2(a.points, tb), nearest_dist2(b.points, ta), tau);
    }

    MetricReport cloud_metrics(const PointCloud & a, const PointCloud & b)
    {
        require_nonempty(a, b);
        const KdTree ta(a.points), tb(b.points);
        const auto d_ab = nearest_dist2(a.points, tb);
        const auto d_ba = nearest_dist2(b.points, ta);
        MetricReport r;
        r.cd_e4 = 1e4 * 0.5 * (mean(d_ab, false) + mean(d_ba, false));
        r.cd_l2_e4 = 1e4 * 0.5 * (mean(d_ab, true) + mean(d_ba, true));
        r.f1_001 = f_from(d_ab, d_ba, 0.001);
        r.f1_01 = f_from(d_ab, d_ba, 0.01);
        r.samples_a = a.size();
        r.samples_b = b.size();
        return r;
    }

    MetricReport mesh_metrics(const TriangleMesh & a, const TriangleMesh & b, std::size_t samples, std::uint64_t seed)
    {
        auto r = cloud_metrics(sample_surface(a, samples, seed), sample_surface(b, samples, seed + 1));
        r.seed = seed;
        return r;
    }

    std::string MetricReport::to_json() const
    {
        nlohmann::ordered_json j;
        j["cd_e4"] = cd_e4;
        j["cd_l2_e4"] = cd_l2_e4;
        j["f1_001"] = f1_001;
        j["f1_01"] = f1_01;
        j["samples_a"] = samples_a;
        j["samples_b"] = samples_b;
        j["seed"] = seed;
        return j.dump(2);
    }

    BoundaryStats boundary_stats(const TriangleMesh & mesh)
    {
        mesh.validate();
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> edges;
        std::vector<std::uint8_t> used(mesh.num_vertices(), 0);
        UnionFind faces_uf(mesh.num_vertices());
        for (const auto & t : mesh.triangles)
            for (int k = 0; k < 3; ++k)
            {
                const auto a = t[k], b = t[(k + 1) % 3];
                ++edges[{std::min(a, b), std::max(a, b)}];
                used[a] = 1;
                faces_uf.unite(a, b);
            }

        BoundaryStats s;
        UnionFind loops_uf(mesh.num_vertices());
        std::vector<std::uint8_t> on_boundary(mesh.num_vertices(), 0);
        for (const auto & [e, count] : edges)
        {
            if (count == 1)
            {
                ++s.boundary_edges;
                loops_uf.unite(e.first, e.second);
                on_boundary[e.first] = on_boundary[e.second] = 1;
            }
            if (count > 2) ++s.nonmanifold_edges;
        }
        std::size_t v = 0;
        for (std::uint32_t i = 0; i < mesh.num_vertices(); ++i)
        {
            if (used[i])
            {
                ++v;
                s.components += faces_uf.find(i) == i;
            }
            s.boundary_loops += on_boundary[i] && loops_uf.find(i) == i;
        }
        s.euler = static_cast<long long>(v) - static_cast<long long>(edges.size())
            + static_cast<long long>(mesh.num_faces());
        return s;
    }
}  // namespace sparseflex
