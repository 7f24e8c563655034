#pragma once

#include <array>
#include <span>
#include <vector>

#include "flexicubes.hpp"
#include "render.hpp"

namespace sparseflex
{
    /// Top-level weights (render, prune, kl, flex) and the rendering sub-weights.
    /// `kl` is carried for completeness and never used: there is no latent space here.
    struct LossWeights
    {
        double render = 1.0;
        double prune = 1.0;
        double kl = 0.0;
        double flex = 0.1;

        double depth = 1.0;
        double normal = 1.0;
        double mask = 0.5;
        double ssim = 0.2;

        /// Throws std::invalid_argument on negative weights or when every weight is zero.
        void validate() const;
    };

    /// Shrinkage weights inside the regularizer.
    struct FlexRegWeights
    {
        double alpha = 0.01;
        double beta = 0.01;
        double deform = 0.1;
    };

    struct RenderLoss
    {
        double value = 0.0;
        double depth_term = 0.0;
        double normal_term = 0.0;
        double mask_term = 0.0;
        double ssim_term = 0.0;
        std::size_t joint_pixels = 0;
        std::vector<double> d_depth;  // d value / d pred.depth
        std::vector<Vec3> d_normal;   // d value / d pred.normal
    };

    /// depth * L1(depth) + normal * L1(normal) + mask * L1(mask) + ssim * (1 - SSIM(normal)).
    /// Depth and normal L1 are averaged over pixels covered in both images; mask L1 over all
    /// pixels; SSIM is averaged over the three normal channels on the full image.
    /// Gradients cover only the depth and normal channels. The top-level `render` weight is
    /// not applied here.
    RenderLoss render_loss(const RenderBuffers & pred, const RenderBuffers & gt, const LossWeights & w);

    struct SsimResult
    {
        double value = 0.0;
        std::vector<double> grad;  // d value / d a; empty unless requested
    };

    /// Mean SSIM with an 11-tap Gaussian window (sigma 1.5), C1 = 0.01^2, C2 = 0.03^2, over
    /// the positions where the window fits. Images smaller than the window shrink it to the
    /// largest odd size that fits.
    SsimResult ssim(std::span<const double> a, std::span<const double> b, int height, int width, bool with_grad = false);

    inline constexpr double kSsimC1 = 0.01 * 0.01;
    inline constexpr double kSsimC2 = 0.03 * 0.03;
    inline constexpr double kProbClamp = 1e-7;

    /// Mean binary cross-entropy; probabilities clamped to [1e-7, 1 - 1e-7].
    double prune_loss(std::span<const double> probs, std::span<const std::uint8_t> occupied);

    struct FlexReg
    {
        double value = 0.0;
        ParamGradients grad;
    };

    /// Mean squared SDF difference across lattice edges (scaled by the squared cell size of
    /// the edge axis), plus shrinkage of alpha and beta toward 1 and of deformations toward 0.
    FlexReg flex_reg(const SparseGrid & grid, const FlexParams & params, const FlexRegWeights & w = {});
    FlexReg flex_reg(const SparseGrid & grid, const FlexParams & params, std::span<const std::array<CornerId, 2>> pairs,
                     const FlexRegWeights & w = {});

    /// Smoothness term alone over explicit corner pairs with a single cell size.
    double sdf_smoothness(std::span<const double> sdf, std::span<const std::array<CornerId, 2>> pairs, double cell);
}  // namespace sparseflex
