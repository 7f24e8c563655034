#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "flexicubes.hpp"
#include "frustum.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "shapes.hpp"

namespace sparseflex
{
    enum class Objective
    {
        Render,
        Chamfer,
        Mixed,
    };

    enum class InitSource
    {
        Analytic,  // named shape from sdf::by_name, plus optional uniform noise
        Constant,  // s = +0.5 everywhere
        Random,    // s uniform in [-noise, noise]
    };

    struct InitConfig
    {
        InitSource source = InitSource::Analytic;
        std::string shape = "sphere";
        double noise = 0.0;
    };

    struct FitConfig
    {
        std::uint32_t resolution = 64;
        int iterations = 400;
        double lr_sdf = 1e-2;
        double lr_deform = 1e-2;
        double lr_weights = 1e-3;
        double lr_final = 1.0;  // cosine decay to lr_final * lr over the run; 1 = constant
        int warmup = 0;         // linear ramp of the learning rates over the first iterations
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        bool lazy_adam = true;  // entries with a zero gradient skip the step (moments included)
        int views = 4;
        int image_size = 128;
        double visibility = 0.3;  // target active-voxel fraction per view
        Containment containment = Containment::Conservative;
        int guard = 1;  // voxel rings added around each view's active set
        double interior_fraction = -1.0;  // < 0: 0.25 for hollow targets, else 0
        bool hollow = false;
        Objective objective = Objective::Render;
        std::size_t chamfer_samples = 20000;
        double band = 1.0;  // fit grid: cells within band * cell of the target surface
        LossWeights loss;
        FlexRegWeights reg;
        InitConfig init;
        std::size_t eval_samples = 100000;
        std::uint64_t seed = 0;

        double effective_interior_fraction() const
        {
            return interior_fraction >= 0.0 ? interior_fraction : (hollow ? 0.25 : 0.0);
        }

        /// Throws std::invalid_argument on out-of-range values.
        void validate() const;
    };

    /// Parses a JSON fit config. Missing keys keep their defaults; unknown keys and wrong
    /// types raise std::invalid_argument, malformed JSON raises ParseError.
    FitConfig parse_fit_config(const std::string & json_text);
    FitConfig load_fit_config(const std::string & path);
    std::string fit_config_to_json(const FitConfig & cfg);

    struct FitReport
    {
        std::vector<double> loss_trace;
        MetricReport initial;
        MetricReport final;
        double wall_seconds = 0.0;
        std::size_t peak_active = 0;
        std::size_t grid_voxels = 0;
        std::size_t empty_views = 0;

        /// JSON; `with_timing = false` drops the wall clock so reports compare bit-for-bit.
        std::string to_json(bool with_timing = true) const;
    };

    FlexParams init_params(const SparseGrid & grid, const InitConfig & init, std::uint64_t seed);

    enum class CameraMode
    {
        Orbit,
        Interior,
    };

    /// Orbit: uniform on the sphere of radius 2x the box half-diagonal around the box center,
    /// looking at the center. Interior: uniform in the box, uniform random view direction.
    /// fov 60 degrees, aspect 1, near 0.01, far 10.
    std::vector<Camera> sample_cameras(std::uint64_t seed, int count, CameraMode mode, const Box & target_box);

    struct FitResult
    {
        FlexParams params;
        SparseGrid grid;
        FitReport report;
        TriangleMesh mesh;  // full extraction of the final params
    };

    /// Fits FlexParams to `target` (already inside the domain [-1,1]^3). Throws NumericalError
    /// on a non-finite loss.
    FitResult fit(const TriangleMesh & target, const FitConfig & cfg);

    /// Bounding box of the mesh vertices.
    Box bounding_box(const TriangleMesh & mesh);
}  // namespace sparseflex
