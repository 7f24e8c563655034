#include "sparseflex/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "sparseflex/optimize.hpp"
#include "sparseflex/parallel.hpp"
#include "sparseflex/shapes.hpp"

namespace sparseflex
{
    namespace
    {
        // Per-item sizes of the live structures, kept in step with the memory_bytes() methods.
        constexpr std::size_t kVoxelGridBytes = sizeof(VoxelCoord) + sizeof(std::uint64_t) + sizeof(std::array<CornerId, 8>);
        constexpr std::size_t kCornerGridBytes = sizeof(VoxelCoord);
        constexpr std::size_t kVoxelParamBytes = sizeof(std::array<double, 8>) + sizeof(std::array<double, 12>);
        constexpr std::size_t kCornerParamBytes = sizeof(double) + sizeof(Vec3);
        constexpr std::size_t kVertexBytes = sizeof(Vec3) + sizeof(VoxelId);
        constexpr std::size_t kFaceBytes = sizeof(Triangle) + sizeof(EdgeId);
        constexpr std::size_t kPixelBytes = sizeof(double) + sizeof(Vec3) + sizeof(std::uint8_t) + sizeof(std::int32_t);

        SparseGrid dense_grid(std::uint32_t n)
        {
            std::vector<VoxelCoord> coords;
            coords.reserve(static_cast<std::size_t>(n) * n * n);
            for (std::uint32_t k = 0; k < n; ++k)
                for (std::uint32_t j = 0; j < n; ++j)
                    for (std::uint32_t i = 0; i < n; ++i) coords.push_back({i, j, k});
            return build_grid(coords, n);
        }

        std::size_t count_corners(const SparseGrid & grid, std::span<const VoxelId> ids)
        {
            std::vector<std::uint8_t> seen(grid.num_corners(), 0);
            std::size_t n = 0;
            for (const VoxelId v : ids)
                for (const CornerId c : grid.corners(v))
                    if (!seen[c])
                    {
                        seen[c] = 1;
                        ++n;
                    }
            return n;
        }

        Box grid_bounds(const SparseGrid & grid)
        {
            Box b{Vec3::Constant(1e300), Vec3::Constant(-1e300)};
            for (CornerId c = 0; c < grid.num_corners(); ++c)
            {
                const Vec3 p = grid.corner_position(c);
                b.min = b.min.cwiseMin(p);
                b.max = b.max.cwiseMax(p);
            }
            return b;
        }

        double median(std::vector<double> v)
        {
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }

        // Times extraction + rasterization of one view over `active` (all voxels when empty).
        BenchRow measure(const SparseGrid & grid, const FlexParams & params, std::span<const VoxelId> active, bool all,
                         const Camera & cam, const BenchOptions & opts)
        {
            BenchRow row;
            row.total_voxels = grid.num_voxels();
            std::vector<double> ms;
            TriangleMesh mesh;
            for (int r = 0; r < opts.repeats; ++r)
            {
                const auto t0 = std::chrono::steady_clock::now();
                mesh = all ? extract(grid, params) : extract(grid, params, active);
                const RenderBuffers buf = rasterize(mesh, cam, opts.image_size, opts.image_size);
                ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            }
            row.median_ms = median(ms);
            row.active_voxels = all ? grid.num_voxels() : active.size();
            row.active_corners = all ? grid.num_corners() : count_corners(grid, active);
            row.mesh_vertices = mesh.num_vertices();
            row.mesh_faces = mesh.num_faces();
            row.peak_bytes = accounted_bytes(row.active_voxels, row.active_corners, row.mesh_vertices, row.mesh_faces,
                                             opts.image_size, opts.image_size);
            return row;
        }
    }  // namespace

    const char * mode_name(BenchMode m)
    {
        switch (m)
        {
            case BenchMode::Dense: return "dense";
            case BenchMode::Sparse: return "sparse";
            case BenchMode::Sectional: return "sectional";
        }
        return "?";
    }

    std::size_t accounted_bytes(std::size_t voxels, std::size_t corners, std::size_t mesh_vertices, std::size_t mesh_faces,
                                int height, int width)
    {
        return voxels * (kVoxelGridBytes + kVoxelParamBytes) + corners * (kCornerGridBytes + kCornerParamBytes)
            + mesh_vertices * kVertexBytes + mesh_faces * kFaceBytes
            + static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * kPixelBytes;
    }

    BenchReport run_bench(const BenchOptions & opts)
    {
        if (opts.repeats < 1) throw std::invalid_argument("bench: repeats must be >= 1");
        if (opts.image_size < 1) throw std::invalid_argument("bench: image size must be >= 1");
        for (const double a : opts.alphas)
            if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("bench: alphas must lie in (0, 1]");
        const SdfFunction fn = sdf::by_name(opts.shape);

        BenchReport report;
        report.threads = num_threads();
        report.seed = opts.seed;
        for (const std::uint32_t n : opts.resolutions)
        {
            const SparseGrid sparse = sign_change_grid(fn, n);
            if (sparse.empty()) throw std::invalid_argument("bench: shape has no surface at resolution " + std::to_string(n));
            const FlexParams sparse_params = sample_params(sparse, fn);
            const Camera cam = sample_cameras(opts.seed, 1, CameraMode::Orbit, grid_bounds(sparse)).front();

            if (opts.dense)
            {
                const std::size_t cells = static_cast<std::size_t>(n) * n * n;
                const std::size_t corners = static_cast<std::size_t>(n + 1) * (n + 1) * (n + 1);
                const std::size_t floor_bytes = accounted_bytes(cells, corners, 0, 0, opts.image_size, opts.image_size);
                BenchRow row;
                if (floor_bytes > opts.dense_budget)
                {
                    row.skipped = true;
                    row.total_voxels = row.active_voxels = cells;
                    row.active_corners = corners;
                    row.peak_bytes = floor_bytes;
                }
                else
                {
                    const SparseGrid dense = dense_grid(n);
                    const FlexParams dense_params = sample_params(dense, fn);
                    row = measure(dense, dense_params, {}, true, cam, opts);
                }
                row.resolution = n;
                row.mode = BenchMode::Dense;
                report.rows.push_back(row);
            }

            BenchRow sp = measure(sparse, sparse_params, {}, true, cam, opts);
            sp.resolution = n;
            sp.mode = BenchMode::Sparse;
            report.rows.push_back(sp);

            for (const double a : opts.alphas)
            {
                if (a >= 1.0) continue;  // alpha = 1 is the sparse row
                const auto fr = adapt_frustum(sparse, cam, a);
                BenchRow row = measure(sparse, sparse_params, fr.active, false, with_planes(cam, fr.near, fr.far), opts);
                row.resolution = n;
                row.mode = BenchMode::Sectional;
                row.alpha = a;
                report.rows.push_back(row);
            }
        }
        return report;
    }

    std::string BenchReport::to_csv(bool with_timing) const
    {
        std::ostringstream out;
        out << "# sparseflex bench: extraction + rasterization of one view per configuration\n"
            << "# feed-forward proxy: no neural decoding is timed; bytes are accounted, not measured\n"
            << "# seed " << seed << "\n";
        if (with_timing) out << "# threads " << threads << "\n";
        out << "resolution,mode,alpha,status,total_voxels,active_voxels,active_corners,mesh_vertices,mesh_faces,peak_bytes";
        if (with_timing) out << ",median_ms";
        out << "\n";
        for (const BenchRow & r : rows)
        {
            out << r.resolution << ',' << mode_name(r.mode) << ',' << r.alpha << ',' << (r.skipped ? "OOM" : "ok") << ','
                << r.total_voxels << ',' << r.active_voxels << ',' << r.active_corners << ',' << r.mesh_vertices << ','
                << r.mesh_faces << ',' << r.peak_bytes;
            if (with_timing)
            {
                out << ',';
                if (!r.skipped) out << std::fixed << std::setprecision(3) << r.median_ms << std::defaultfloat;
            }
            out << "\n";
        }
        return out.str();
    }
}  // namespace sparseflex
