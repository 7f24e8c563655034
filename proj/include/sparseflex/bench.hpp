#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexicubes.hpp"
#include "render.hpp"

namespace sparseflex
{
    enum class BenchMode
    {
        Dense,
        Sparse,
        Sectional,
    };

    struct BenchRow
    {
        std::uint32_t resolution = 0;
        BenchMode mode = BenchMode::Sparse;
        double alpha = 1.0;         // visibility ratio; 1 for dense and sparse rows
        bool skipped = false;       // dense state over the byte budget ("OOM")
        double median_ms = 0.0;
        std::size_t peak_bytes = 0;
        std::size_t total_voxels = 0;   // voxels of the grid the mode starts from
        std::size_t active_voxels = 0;  // voxels the timed pass works on
        std::size_t active_corners = 0;
        std::size_t mesh_vertices = 0;
        std::size_t mesh_faces = 0;
    };

    struct BenchOptions
    {
        std::string shape = "sphere";
        std::vector<std::uint32_t> resolutions{64, 128, 256};
        std::vector<double> alphas{0.1, 0.3, 1.0};
        int repeats = 5;
        std::uint64_t seed = 0;
        int image_size = 256;
        std::size_t dense_budget = std::size_t{2} << 30;
        bool dense = true;
    };

    struct BenchReport
    {
        std::vector<BenchRow> rows;
        int threads = 1;
        std::uint64_t seed = 0;

        /// Header comment lines then one row per configuration, see docs/formats.md.
        /// Timing columns are omitted when `with_timing` is false.
        std::string to_csv(bool with_timing = true) const;
    };

    /// Explicit byte formula for the live state of one pass: grid structures and parameters of
    /// the voxels and corners worked on, the extracted mesh, and the render buffers.
    std::size_t accounted_bytes(std::size_t voxels, std::size_t corners, std::size_t mesh_vertices,
                                std::size_t mesh_faces, int height, int width);

    /// Per resolution: dense (all N_r^3 cells), sparse (sign-change cells) and one sectional row
    /// per alpha < 1 (alpha = 1 is the sparse row). Timed region: extraction + rasterization of
    /// one view, median over `repeats`.
    BenchReport run_bench(const BenchOptions & opts);

    const char * mode_name(BenchMode m);
}  // namespace sparseflex
