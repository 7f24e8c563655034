#pragma once
// Reference dual marching cubes on a dense lattice. Written against plain index arithmetic,
// no SparseGrid: one vertex per mixed cell at the mean of its edge crossings, one quad per
// crossing lattice edge whose four surrounding cells exist.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace oracle
{
    struct DenseQuad
    {
        std::array<Eigen::Vector3d, 4> v;  // dual vertices of the four cells around the edge
        bool flip = false;                 // low end of the edge is positive
    };

    struct DenseDmc
    {
        std::size_t vertices = 0;
        // Key: (i, j, k, axis) of the edge's low end.
        std::map<std::array<int, 4>, DenseQuad> quads;
    };

    inline DenseDmc dense_dmc(const std::function<double(const Eigen::Vector3d &)> & f, int n)
    {
        const int g = n + 1;
        const double h = 2.0 / n;
        auto pos = [&](int i, int j, int k) { return Eigen::Vector3d(-1.0 + i * h, -1.0 + j * h, -1.0 + k * h); };
        std::vector<double> s(static_cast<std::size_t>(g) * g * g);
        auto at = [&](int i, int j, int k) -> double & { return s[(static_cast<std::size_t>(k) * g + j) * g + i]; };
        for (int k = 0; k < g; ++k)
            for (int j = 0; j < g; ++j)
                for (int i = 0; i < g; ++i) at(i, j, k) = f(pos(i, j, k));
        auto pos_sign = [](double x) { return x >= 0.0; };

        std::vector<Eigen::Vector3d> vert(static_cast<std::size_t>(n) * n * n);
        std::vector<char> has(vert.size(), 0);
        auto cell = [&](int i, int j, int k) { return (static_cast<std::size_t>(k) * n + j) * n + i; };
        DenseDmc out;
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < n; ++i)
                {
                    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
                    int count = 0;
                    // 12 edges: 4 per axis.
                    for (int axis = 0; axis < 3; ++axis)
                        for (int a = 0; a < 2; ++a)
                            for (int b = 0; b < 2; ++b)
                            {
                                int lo[3] = {i, j, k};
                                const int u = (axis + 1) % 3, w = (axis + 2) % 3;
                                lo[u] += a;
                                lo[w] += b;
                                int hi[3] = {lo[0], lo[1], lo[2]};
                                hi[axis] += 1;
                                const double sa = at(lo[0], lo[1], lo[2]);
                                const double sb = at(hi[0], hi[1], hi[2]);
                                if (pos_sign(sa) == pos_sign(sb)) continue;
                                const double t = sa / (sa - sb);
                                sum += pos(lo[0], lo[1], lo[2]) + t * (pos(hi[0], hi[1], hi[2]) - pos(lo[0], lo[1], lo[2]));
                                ++count;
                            }
                    if (count == 0) continue;
                    vert[cell(i, j, k)] = sum / count;
                    has[cell(i, j, k)] = 1;
                    ++out.vertices;
                }

        for (int k = 0; k < g; ++k)
            for (int j = 0; j < g; ++j)
                for (int i = 0; i < g; ++i)
                    for (int axis = 0; axis < 3; ++axis)
                    {
                        int hi[3] = {i, j, k};
                        hi[axis] += 1;
                        if (hi[axis] > n) continue;
                        if (pos_sign(at(i, j, k)) == pos_sign(at(hi[0], hi[1], hi[2]))) continue;
                        const int u = (axis + 1) % 3, w = (axis + 2) % 3;
                        DenseQuad q;
                        bool complete = true;
                        // Cells around the edge, counter-clockwise about +axis.
                        const int du[4] = {-1, 0, 0, -1};
                        const int dw[4] = {-1, -1, 0, 0};
                        for (int r = 0; r < 4 && complete; ++r)
                        {
                            int c[3] = {i, j, k};
                            c[u] += du[r];
                            c[w] += dw[r];
                            if (c[0] < 0 || c[1] < 0 || c[2] < 0 || c[0] >= n || c[1] >= n || c[2] >= n)
                            {
                                complete = false;
                                break;
                            }
                            q.v[r] = vert[cell(c[0], c[1], c[2])];
                        }
                        if (!complete) continue;
                        q.flip = pos_sign(at(i, j, k));
                        out.quads[{i, j, k, axis}] = q;
                    }
        return out;
    }
}  // namespace oracle
