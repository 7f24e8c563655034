#include "sparseflex/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparseflex
{
    namespace
    {
        double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

        std::vector<double> gaussian_taps(int size, double sigma)
        {
            std::vector<double> g(size);
            const double r = 0.5 * (size - 1);
            double sum = 0.0;
            for (int i = 0; i < size; ++i)
            {
                g[i] = std::exp(-(i - r) * (i - r) / (2.0 * sigma * sigma));
                sum += g[i];
            }
            for (auto & x : g) x /= sum;
            return g;
        }

        // Separable "valid" filtering: (H, W) -> (H - n + 1, W - n + 1).
        std::vector<double> filter_valid(const std::vector<double> & img, int h, int w, const std::vector<double> & g)
        {
            const int n = static_cast<int>(g.size());
            const int hv = h - n + 1;
            const int wv = w - n + 1;
            std::vector<double> rows(static_cast<std::size_t>(h) * wv, 0.0);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < wv; ++x)
                {
                    double s = 0.0;
                    for (int k = 0; k < n; ++k) s += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
                    rows[static_cast<std::size_t>(y) * wv + x] = s;
                }
            std::vector<double> out(static_cast<std::size_t>(hv) * wv, 0.0);
            for (int y = 0; y < hv; ++y)
                for (int x = 0; x < wv; ++x)
                {
                    double s = 0.0;
                    for (int k = 0; k < n; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * wv + x];
                    out[static_cast<std::size_t>(y) * wv + x] = s;
                }
            return out;
        }

        // Adjoint of filter_valid: (H - n + 1, W - n + 1) -> (H, W).
        std::vector<double> filter_adjoint(const std::vector<double> & src, int h, int w, const std::vector<double> & g)
        {
            const int n = static_cast<int>(g.size());
            const int hv = h - n + 1;
            const int wv = w - n + 1;
            std::vector<double> rows(static_cast<std::size_t>(h) * wv, 0.0);
            for (int y = 0; y < hv; ++y)
                for (int x = 0; x < wv; ++x)
                {
                    const double v = src[static_cast<std::size_t>(y) * wv + x];
                    for (int k = 0; k < n; ++k) rows[static_cast<std::size_t>(y + k) * wv + x] += g[k] * v;
                }
            std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < wv; ++x)
                {
                    const double v = rows[static_cast<std::size_t>(y) * wv + x];
                    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(y) * w + x + k] += g[k] * v;
                }
            return out;
        }
    }  // namespace

    void LossWeights::validate() const
    {
        const double all[] = {render, prune, kl, flex, depth, normal, mask, ssim};
        for (double x : all)
            if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("loss weights must be finite and nonnegative");
        if (std::all_of(std::begin(all), std::end(all), [](double x) { return x == 0.0; }))
            throw std::invalid_argument("at least one loss weight must be positive");
    }

    SsimResult ssim(std::span<const double> a, std::span<const double> b, int height, int width, bool with_grad)
    {
        const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
        if (height < 1 || width < 1 || a.size() != n || b.size() != n)
            throw std::invalid_argument("ssim: images must both be height x width");

        int size = std::min({11, height, width});
        if (size % 2 == 0) --size;
        const auto g = gaussian_taps(size, 1.5);

        std::vector<double> va(a.begin(), a.end()), vb(b.begin(), b.end());
        std::vector<double> aa(n), bb(n), ab(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            aa[i] = va[i] * va[i];
            bb[i] = vb[i] * vb[i];
            ab[i] = va[i] * vb[i];
        }
        const auto mu_a = filter_valid(va, height, width, g);
        const auto mu_b = filter_valid(vb, height, width, g);
        const auto e_aa = filter_valid(aa, height, width, g);
        const auto e_bb = filter_valid(bb, height, width, g);
        const auto e_ab = filter_valid(ab, height, width, g);

        const std::size_t m = mu_a.size();
        SsimResult result;
        std::vector<double> g_mu, g_aa, g_ab;
        if (with_grad)
        {
            g_mu.resize(m);
            g_aa.resize(m);
            g_ab.resize(m);
        }
        double total = 0.0;
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t p = 0; p < m; ++p)
        {
            const double ma = mu_a[p], mb = mu_b[p];
            const double var_a = e_aa[p] - ma * ma;
            const double var_b = e_bb[p] - mb * mb;
            const double cov = e_ab[p] - ma * mb;
            const double a1 = 2.0 * ma * mb + kSsimC1;
            const double a2 = 2.0 * cov + kSsimC2;
            const double b1 = ma * ma + mb * mb + kSsimC1;
            const double b2 = var_a + var_b + kSsimC2;
            const double s = a1 * a2 / (b1 * b2);
            total += s;
            if (with_grad)
            {
                // Partial derivatives with respect to (mu_a, E[a^2], E[ab]).
                const double d_mu = (2.0 * mb * a2 - 2.0 * mb * a1) / (b1 * b2) - s * (2.0 * ma / b1 - 2.0 * ma / b2);
                g_mu[p] = d_mu * inv_m;
                g_aa[p] = -s / b2 * inv_m;
                g_ab[p] = 2.0 * a1 / (b1 * b2) * inv_m;
            }
        }
        result.value = total * inv_m;
        if (with_grad)
        {
            const auto t_mu = filter_adjoint(g_mu, height, width, g);
            const auto t_aa = filter_adjoint(g_aa, height, width, g);
            const auto t_ab = filter_adjoint(g_ab, height, width, g);
            result.grad.resize(n);
            for (std::size_t q = 0; q < n; ++q) result.grad[q] = t_mu[q] + 2.0 * va[q] * t_aa[q] + vb[q] * t_ab[q];
        }
        return result;
    }

    RenderLoss render_loss(const RenderBuffers & pred, const RenderBuffers & gt, const LossWeights & w)
    {
        if (pred.width != gt.width || pred.height != gt.height)
            throw std::invalid_argument("render_loss: resolution mismatch");
        const std::size_t n = pred.size();
        RenderLoss out;
        out.d_depth.assign(n, 0.0);
        out.d_normal.assign(n, Vec3::Zero());

        std::size_t joint = 0;
        double mask_sum = 0.0;
        for (std::size_t p = 0; p < n; ++p)
        {
            joint += (pred.mask[p] && gt.mask[p]) ? 1 : 0;
            mask_sum += std::abs(static_cast<double>(pred.mask[p]) - static_cast<double>(gt.mask[p]));
        }
        out.joint_pixels = joint;
        out.mask_term = mask_sum / static_cast<double>(n);

        if (joint > 0)
        {
            const double inv = 1.0 / static_cast<double>(joint);
            double depth_sum = 0.0, normal_sum = 0.0;
            for (std::size_t p = 0; p < n; ++p)
            {
                if (!(pred.mask[p] && gt.mask[p])) continue;
                const double dd = pred.depth[p] - gt.depth[p];
                depth_sum += std::abs(dd);
                out.d_depth[p] = w.depth * sign(dd) * inv;
                for (int c = 0; c < 3; ++c)
                {
                    const double dn = pred.normal[p][c] - gt.normal[p][c];
                    normal_sum += std::abs(dn);
                    out.d_normal[p][c] = w.normal * sign(dn) * inv / 3.0;
                }
            }
            out.depth_term = depth_sum * inv;
            out.normal_term = normal_sum * inv / 3.0;
        }

        if (w.ssim > 0.0)
        {
            double ssim_sum = 0.0;
            std::vector<double> pa(n), pb(n);
            for (int c = 0; c < 3; ++c)
            {
                for (std::size_t p = 0; p < n; ++p)
                {
                    pa[p] = pred.normal[p][c];
                    pb[p] = gt.normal[p][c];
                }
                const auto s = ssim(pa, pb, pred.height, pred.width, true);
                ssim_sum += s.value;
                for (std::size_t p = 0; p < n; ++p) out.d_normal[p][c] -= w.ssim * s.grad[p] / 3.0;
            }
            out.ssim_term = 1.0 - ssim_sum / 3.0;
        }

        out.value = w.depth * out.depth_term + w.normal * out.normal_term + w.mask * out.mask_term + w.ssim * out.ssim_term;
        return out;
    }

    double prune_loss(std::span<const double> probs, std::span<const std::uint8_t> occupied)
    {
        if (probs.size() != occupied.size()) throw std::invalid_argument("prune_loss: length mismatch");
        if (probs.empty()) return 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i)
        {
            const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
            sum += occupied[i] ? -std::log(p) : -std::log(1.0 - p);
        }
        return sum / static_cast<double>(probs.size());
    }

    double sdf_smoothness(std::span<const double> sdf, std::span<const std::array<CornerId, 2>> pairs, double cell)
    {
        if (pairs.empty()) return 0.0;
        double sum = 0.0;
        for (const auto & [a, b] : pairs)
        {
            const double d = (sdf[a] - sdf[b]) / cell;
            sum += d * d;
        }
        return sum / static_cast<double>(pairs.size());
    }

    FlexReg flex_reg(const SparseGrid & grid, const FlexParams & params, const FlexRegWeights & w)
    {
        const auto pairs = corner_edge_pairs(grid);
        return flex_reg(grid, params, pairs, w);
    }

    FlexReg flex_reg(const SparseGrid & grid, const FlexParams & params, std::span<const std::array<CornerId, 2>> pairs,
                     const FlexRegWeights & w)
    {
        params.validate(grid);
        FlexReg out;
        out.grad = ParamGradients::zeros(grid);
        const Vec3 cell = grid.cell_size();
        const Vec3 inv_cell2 = cell.cwiseProduct(cell).cwiseInverse();

        if (!pairs.empty())
        {
            const double inv = 1.0 / static_cast<double>(pairs.size());
            double sum = 0.0;
            for (const auto & [a, b] : pairs)
            {
                const auto & ca = grid.corner_coord(a);
                const auto & cb = grid.corner_coord(b);
                const int axis = ca.i != cb.i ? 0 : (ca.j != cb.j ? 1 : 2);
                const double diff = params.sdf[a] - params.sdf[b];
                sum += diff * diff * inv_cell2[axis];
                const double g = 2.0 * diff * inv_cell2[axis] * inv;
                out.grad.d_sdf[a] += g;
                out.grad.d_sdf[b] -= g;
            }
            out.value += sum * inv;
        }

        if (grid.num_voxels() > 0)
        {
            const double inv_a = 1.0 / (8.0 * grid.num_voxels());
            const double inv_b = 1.0 / (12.0 * grid.num_voxels());
            double sa = 0.0, sb = 0.0;
            for (std::size_t v = 0; v < grid.num_voxels(); ++v)
            {
                for (int c = 0; c < 8; ++c)
                {
                    const double d = params.alpha[v][c] - 1.0;
                    sa += d * d;
                    out.grad.d_alpha[v][c] = 2.0 * w.alpha * d * inv_a;
                }
                for (int e = 0; e < 12; ++e)
                {
                    const double d = params.beta[v][e] - 1.0;
                    sb += d * d;
                    out.grad.d_beta[v][e] = 2.0 * w.beta * d * inv_b;
                }
            }
            out.value += w.alpha * sa * inv_a + w.beta * sb * inv_b;
        }

        if (grid.num_corners() > 0)
        {
            const double inv = 1.0 / static_cast<double>(grid.num_corners());
            double sum = 0.0;
            for (std::size_t c = 0; c < grid.num_corners(); ++c)
            {
                const Vec3 scaled = params.deform[c].cwiseProduct(inv_cell2);
                sum += params.deform[c].dot(scaled);
                out.grad.d_deform[c] = 2.0 * w.deform * scaled * inv;
            }
            out.value += w.deform * sum * inv;
        }
        return out;
    }
}  // namespace sparseflex
