#include "sparseflex/optimize.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "sparseflex/meshio.hpp"
#include "sparseflex/render.hpp"

namespace sparseflex
{
    namespace
    {
        using nlohmann::json;

        void check_keys(const json & j, std::initializer_list<const char *> allowed, const std::string & where)
        {
            if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
            for (const auto & item : j.items())
            {
                bool ok = false;
                for (const char * k : allowed) ok = ok || item.key() == k;
                if (!ok) throw std::invalid_argument(where + ": unknown key '" + item.key() + "'");
            }
        }

        template <typename T>
        void read(const json & j, const char * key, T & out, const std::string & where)
        {
            if (!j.contains(key)) return;
            try
            {
                out = j.at(key).get<T>();
            }
            catch (const json::exception &)
            {
                throw std::invalid_argument(where + "." + key + ": wrong type");
            }
        }

        Objective objective_from(const std::string & s)
        {
            if (s == "render") return Objective::Render;
            if (s == "chamfer") return Objective::Chamfer;
            if (s == "mixed") return Objective::Mixed;
            throw std::invalid_argument("objective must be render, chamfer or mixed");
        }

        const char * objective_name(Objective o)
        {
            switch (o)
            {
            case Objective::Render: return "render";
            case Objective::Chamfer: return "chamfer";
            case Objective::Mixed: return "mixed";
            }
            return "render";
        }

        InitSource source_from(const std::string & s)
        {
            if (s == "analytic") return InitSource::Analytic;
            if (s == "constant") return InitSource::Constant;
            if (s == "random") return InitSource::Random;
            throw std::invalid_argument("init.source must be analytic, constant or random");
        }

        const char * source_name(InitSource s)
        {
            switch (s)
            {
            case InitSource::Analytic: return "analytic";
            case InitSource::Constant: return "constant";
            case InitSource::Random: return "random";
            }
            return "analytic";
        }

        json metrics_json(const MetricReport & m)
        {
            auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
            json j;
            j["cd_e4"] = num(m.cd_e4);
            j["cd_l2_e4"] = num(m.cd_l2_e4);
            j["f1_001"] = num(m.f1_001);
            j["f1_01"] = num(m.f1_01);
            j["samples_a"] = m.samples_a;
            j["samples_b"] = m.samples_b;
            j["seed"] = m.seed;
            return j;
        }

        MetricReport score(const TriangleMesh & mesh, const TriangleMesh & target, std::size_t samples, std::uint64_t seed)
        {
            if (mesh.empty())
            {
                MetricReport r;
                r.cd_e4 = r.cd_l2_e4 = std::numeric_limits<double>::quiet_NaN();
                r.seed = seed;
                return r;
            }
            return mesh_metrics(mesh, target, samples, seed);
        }

        Vec3 random_direction(std::mt19937_64 & rng)
        {
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            const double z = 2.0 * uni(rng) - 1.0;
            const double phi = 2.0 * M_PI * uni(rng);
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            return {rho * std::cos(phi), rho * std::sin(phi), z};
        }

        Camera aim(const Vec3 & eye, const Vec3 & dir)
        {
            const Vec3 up = std::abs(dir.z()) < 0.99 ? Vec3::UnitZ() : Vec3::UnitY();
            return Camera::look_at(eye, eye + dir, up, M_PI / 3.0, 1.0, 0.01, 10.0);
        }

        // Adam. In lazy mode an entry whose gradient is exactly zero this step keeps its value
        // and moments, and bias correction counts only the steps that touched it: entries
        // outside every frustum of an iteration are not part of that iteration's problem.
        struct Adam
        {
            ParamGradients m, v, n;
            int t = 0;

            explicit Adam(const SparseGrid & grid)
                : m(ParamGradients::zeros(grid)), v(ParamGradients::zeros(grid)), n(ParamGradients::zeros(grid))
            {
            }

            void step(FlexParams & p, const ParamGradients & g, const FitConfig & cfg, double scale)
            {
                ++t;
                auto update = [&](double & x, double gx, double & mx, double & vx, double & nx, double lr) {
                    if (cfg.lazy_adam && gx == 0.0) return;
                    nx = cfg.lazy_adam ? nx + 1.0 : t;
                    mx = cfg.beta1 * mx + (1.0 - cfg.beta1) * gx;
                    vx = cfg.beta2 * vx + (1.0 - cfg.beta2) * gx * gx;
                    const double c1 = 1.0 - std::pow(cfg.beta1, nx);
                    const double c2 = 1.0 - std::pow(cfg.beta2, nx);
                    x -= scale * lr * (mx / c1) / (std::sqrt(vx / c2) + cfg.eps);
                };
                for (std::size_t i = 0; i < p.sdf.size(); ++i)
                    update(p.sdf[i], g.d_sdf[i], m.d_sdf[i], v.d_sdf[i], n.d_sdf[i], cfg.lr_sdf);
                for (std::size_t i = 0; i < p.deform.size(); ++i)
                    for (int k = 0; k < 3; ++k)
                        update(p.deform[i][k], g.d_deform[i][k], m.d_deform[i][k], v.d_deform[i][k], n.d_deform[i][k], cfg.lr_deform);
                for (std::size_t i = 0; i < p.alpha.size(); ++i)
                {
                    for (int k = 0; k < 8; ++k)
                        update(p.alpha[i][k], g.d_alpha[i][k], m.d_alpha[i][k], v.d_alpha[i][k], n.d_alpha[i][k], cfg.lr_weights);
                    for (int k = 0; k < 12; ++k)
                        update(p.beta[i][k], g.d_beta[i][k], m.d_beta[i][k], v.d_beta[i][k], n.d_beta[i][k], cfg.lr_weights);
                }
            }
        };

        // Point-to-point chamfer (squared) between fresh samples of `mesh` and fixed target samples,
        // nearest neighbours held fixed. Returns the value and accumulates vertex gradients.
        double chamfer_term(const TriangleMesh & mesh, const KdTree & target_tree, std::size_t n, std::uint64_t seed,
                            double weight, std::vector<Vec3> & d_vertices)
        {
            const auto s = sample_surface_with_faces(mesh, n, seed);
            const auto & pred = s.cloud.points;
            const auto & tgt = target_tree.points();
            const KdTree pred_tree(pred);

            std::vector<Vec3> d_pred(pred.size(), Vec3::Zero());
            double fwd = 0.0, bwd = 0.0;
            const double inv_p = 1.0 / static_cast<double>(pred.size());
            const double inv_t = 1.0 / static_cast<double>(tgt.size());
            for (std::size_t i = 0; i < pred.size(); ++i)
            {
                const auto hit = target_tree.nearest(pred[i]);
                fwd += hit.dist2;
                d_pred[i] += weight * inv_p * (pred[i] - tgt[hit.index]);
            }
            for (std::size_t j = 0; j < tgt.size(); ++j)
            {
                const auto hit = pred_tree.nearest(tgt[j]);
                bwd += hit.dist2;
                d_pred[hit.index] += weight * inv_t * (pred[hit.index] - tgt[j]);
            }
            for (std::size_t i = 0; i < pred.size(); ++i)
            {
                const auto & t = mesh.triangles[s.face[i]];
                const auto & b = s.bary[i];
                d_vertices[t[0]] += (1.0 - b[0] - b[1]) * d_pred[i];
                d_vertices[t[1]] += b[0] * d_pred[i];
                d_vertices[t[2]] += b[1] * d_pred[i];
            }
            return 0.5 * (fwd * inv_p + bwd * inv_t);
        }
    }  // namespace

    void FitConfig::validate() const
    {
        if (resolution < 1 || resolution > kMaxResolution) throw std::invalid_argument("resolution out of range");
        if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
        if (!(lr_sdf >= 0.0) || !(lr_deform >= 0.0) || !(lr_weights >= 0.0)) throw std::invalid_argument("learning rates must be >= 0");
        if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
        if (!(lr_final >= 0.0 && lr_final <= 1.0)) throw std::invalid_argument("lr_final must be in [0, 1]");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
            throw std::invalid_argument("optimizer moments must satisfy 0 <= beta < 1, eps > 0");
        if (guard < 0) throw std::invalid_argument("guard must be >= 0");
        if (views < 1) throw std::invalid_argument("views must be >= 1");
        if (image_size < 1 || image_size > 4096) throw std::invalid_argument("image_size must be in [1, 4096]");
        if (!(visibility > 0.0 && visibility <= 1.0)) throw std::invalid_argument("visibility ratio must be in (0, 1]");
        if (interior_fraction > 1.0) throw std::invalid_argument("interior_fraction must be <= 1");
        if (chamfer_samples < 1 || eval_samples < 1) throw std::invalid_argument("sample counts must be >= 1");
        if (!(band > 0.0)) throw std::invalid_argument("band must be positive");
        if (!(init.noise >= 0.0)) throw std::invalid_argument("init.noise must be >= 0");
        if (init.source == InitSource::Analytic) sdf::by_name(init.shape);
        loss.validate();
        if (!(reg.alpha >= 0.0) || !(reg.beta >= 0.0) || !(reg.deform >= 0.0))
            throw std::invalid_argument("regularizer weights must be >= 0");
    }

    FitConfig parse_fit_config(const std::string & json_text)
    {
        json j;
        try
        {
            j = json::parse(json_text);
        }
        catch (const json::parse_error & e)
        {
            throw ParseError(std::string("fit config: ") + e.what(), e.byte);
        }
        const std::string where = "fit config";
        check_keys(j, {"resolution", "iterations", "lr_sdf", "lr_deform", "lr_weights", "lr_final", "warmup", "beta1", "beta2", "eps", "views",
                       "image_size", "visibility", "containment", "guard", "lazy_adam", "interior_fraction", "hollow", "objective", "chamfer_samples", "band",
                       "loss", "reg", "init", "eval_samples", "seed"},
                   where);
        FitConfig c;
        read(j, "resolution", c.resolution, where);
        read(j, "iterations", c.iterations, where);
        read(j, "lr_sdf", c.lr_sdf, where);
        read(j, "lr_deform", c.lr_deform, where);
        read(j, "lr_weights", c.lr_weights, where);
        read(j, "lr_final", c.lr_final, where);
        read(j, "warmup", c.warmup, where);
        read(j, "beta1", c.beta1, where);
        read(j, "beta2", c.beta2, where);
        read(j, "eps", c.eps, where);
        read(j, "views", c.views, where);
        read(j, "image_size", c.image_size, where);
        read(j, "visibility", c.visibility, where);
        read(j, "guard", c.guard, where);
        read(j, "lazy_adam", c.lazy_adam, where);
        read(j, "interior_fraction", c.interior_fraction, where);
        read(j, "hollow", c.hollow, where);
        read(j, "chamfer_samples", c.chamfer_samples, where);
        read(j, "band", c.band, where);
        read(j, "eval_samples", c.eval_samples, where);
        read(j, "seed", c.seed, where);
        if (j.contains("containment"))
        {
            std::string s;
            read(j, "containment", s, where);
            if (s == "center") c.containment = Containment::Center;
            else if (s == "conservative") c.containment = Containment::Conservative;
            else throw std::invalid_argument("containment must be center or conservative");
        }
        if (j.contains("objective"))
        {
            std::string s;
            read(j, "objective", s, where);
            c.objective = objective_from(s);
        }
        if (j.contains("loss"))
        {
            const auto & l = j["loss"];
            check_keys(l, {"render", "prune", "kl", "flex", "depth", "normal", "mask", "ssim"}, where + ".loss");
            read(l, "render", c.loss.render, where);
            read(l, "prune", c.loss.prune, where);
            read(l, "kl", c.loss.kl, where);
            read(l, "flex", c.loss.flex, where);
            read(l, "depth", c.loss.depth, where);
            read(l, "normal", c.loss.normal, where);
            read(l, "mask", c.loss.mask, where);
            read(l, "ssim", c.loss.ssim, where);
        }
        if (j.contains("reg"))
        {
            const auto & r = j["reg"];
            check_keys(r, {"alpha", "beta", "deform"}, where + ".reg");
            read(r, "alpha", c.reg.alpha, where);
            read(r, "beta", c.reg.beta, where);
            read(r, "deform", c.reg.deform, where);
        }
        if (j.contains("init"))
        {
            const auto & i = j["init"];
            check_keys(i, {"source", "shape", "noise"}, where + ".init");
            if (i.contains("source"))
            {
                std::string s;
                read(i, "source", s, where);
                c.init.source = source_from(s);
            }
            read(i, "shape", c.init.shape, where);
            read(i, "noise", c.init.noise, where);
        }
        c.validate();
        return c;
    }

    FitConfig load_fit_config(const std::string & path)
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_fit_config(ss.str());
    }

    std::string fit_config_to_json(const FitConfig & c)
    {
        nlohmann::ordered_json j;
        j["resolution"] = c.resolution;
        j["iterations"] = c.iterations;
        j["lr_sdf"] = c.lr_sdf;
        j["lr_deform"] = c.lr_deform;
        j["lr_weights"] = c.lr_weights;
        j["lr_final"] = c.lr_final;
        j["warmup"] = c.warmup;
        j["beta1"] = c.beta1;
        j["beta2"] = c.beta2;
        j["eps"] = c.eps;
        j["views"] = c.views;
        j["image_size"] = c.image_size;
        j["visibility"] = c.visibility;
        j["guard"] = c.guard;
        j["lazy_adam"] = c.lazy_adam;
        j["containment"] = c.containment == Containment::Center ? "center" : "conservative";
        j["interior_fraction"] = c.interior_fraction;
        j["hollow"] = c.hollow;
        j["objective"] = objective_name(c.objective);
        j["chamfer_samples"] = c.chamfer_samples;
        j["band"] = c.band;
        j["loss"] = {{"render", c.loss.render}, {"prune", c.loss.prune}, {"kl", c.loss.kl}, {"flex", c.loss.flex},
                     {"depth", c.loss.depth}, {"normal", c.loss.normal}, {"mask", c.loss.mask}, {"ssim", c.loss.ssim}};
        j["reg"] = {{"alpha", c.reg.alpha}, {"beta", c.reg.beta}, {"deform", c.reg.deform}};
        j["init"] = {{"source", source_name(c.init.source)}, {"shape", c.init.shape}, {"noise", c.init.noise}};
        j["eval_samples"] = c.eval_samples;
        j["seed"] = c.seed;
        return j.dump(2);
    }

    std::string FitReport::to_json(bool with_timing) const
    {
        nlohmann::ordered_json j;
        j["iterations"] = loss_trace.size();
        j["loss_trace"] = loss_trace;
        j["initial"] = metrics_json(initial);
        j["final"] = metrics_json(final);
        j["peak_active"] = peak_active;
        j["grid_voxels"] = grid_voxels;
        j["empty_views"] = empty_views;
        if (with_timing) j["wall_seconds"] = wall_seconds;
        return j.dump(2);
    }

    FlexParams init_params(const SparseGrid & grid, const InitConfig & init, std::uint64_t seed)
    {
        FlexParams p = FlexParams::uniform(grid, 0.5);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        switch (init.source)
        {
        case InitSource::Constant: break;
        case InitSource::Analytic:
        {
            const auto fn = sdf::by_name(init.shape);
            for (CornerId c = 0; c < grid.num_corners(); ++c)
            {
                p.sdf[c] = fn(grid.corner_position(c));
                if (init.noise > 0.0) p.sdf[c] += init.noise * uni(rng);
            }
            break;
        }
        case InitSource::Random:
        {
            const double amp = init.noise > 0.0 ? init.noise : 1.0;
            for (auto & s : p.sdf) s = amp * uni(rng);
            break;
        }
        }
        return p;
    }

    std::vector<Camera> sample_cameras(std::uint64_t seed, int count, CameraMode mode, const Box & box)
    {
        if (count < 1) throw std::invalid_argument("sample_cameras: count must be >= 1");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const Vec3 center = box.center();
        const double radius = 2.0 * 0.5 * box.diagonal();
        std::vector<Camera> cams;
        cams.reserve(count);
        for (int i = 0; i < count; ++i)
        {
            if (mode == CameraMode::Orbit)
            {
                const Vec3 eye = center + radius * random_direction(rng);
                cams.push_back(aim(eye, (center - eye).normalized()));
            }
            else
            {
                Vec3 eye;
                for (int d = 0; d < 3; ++d) eye[d] = box.min[d] + uni(rng) * (box.max[d] - box.min[d]);
                cams.push_back(aim(eye, random_direction(rng)));
            }
        }
        return cams;
    }

    Box bounding_box(const TriangleMesh & mesh)
    {
        if (mesh.vertices.empty()) throw std::invalid_argument("bounding_box: empty mesh");
        Box b{mesh.vertices.front(), mesh.vertices.front()};
        for (const auto & v : mesh.vertices)
        {
            b.min = b.min.cwiseMin(v);
            b.max = b.max.cwiseMax(v);
        }
        return b;
    }

    FitResult fit(const TriangleMesh & target, const FitConfig & cfg)
    {
        const auto t0 = std::chrono::steady_clock::now();
        cfg.validate();
        target.validate();
        if (target.empty()) throw std::invalid_argument("fit: empty target mesh");
        const Box domain;
        const Box tbox = bounding_box(target);
        for (int d = 0; d < 3; ++d)
            if (tbox.min[d] < domain.min[d] || tbox.max[d] > domain.max[d])
                throw std::invalid_argument("fit: target must lie inside [-1, 1]^3 (normalize it first)");

        FitResult out;
        out.grid = voxelize_mesh(target, cfg.resolution, domain, cfg.band);
        const SparseGrid & grid = out.grid;
        FlexParams & params = out.params;
        params = init_params(grid, cfg.init, cfg.seed);
        FitReport & report = out.report;
        report.grid_voxels = grid.num_voxels();
        report.initial = score(extract(grid, params), target, cfg.eval_samples, cfg.seed);

        const auto pairs = corner_edge_pairs(grid);
        const bool use_render = cfg.objective != Objective::Chamfer;
        const bool use_chamfer = cfg.objective != Objective::Render;
        std::unique_ptr<KdTree> target_tree;
        if (use_chamfer)
            target_tree = std::make_unique<KdTree>(sample_surface(target, cfg.chamfer_samples, cfg.seed ^ 0x7f4a7c15ULL).points);

        const double interior = cfg.effective_interior_fraction();
        const double view_weight = cfg.loss.render / static_cast<double>(cfg.views);
        const int size = cfg.image_size;
        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        Adam adam(grid);

        for (int it = 0; it < cfg.iterations; ++it)
        {
            ParamGradients grads = ParamGradients::zeros(grid);
            double loss = 0.0;

            if (use_render)
                for (int view = 0; view < cfg.views; ++view)
                {
                    const CameraMode mode = uni(rng) < interior ? CameraMode::Interior : CameraMode::Orbit;
                    const Camera base = sample_cameras(rng(), 1, mode, tbox).front();
                    const auto fr = adapt_frustum(grid, base, cfg.visibility, {0.02, 32, cfg.containment});
                    const Camera cam = with_planes(base, fr.near, fr.far);
                    const auto active = cfg.guard > 0 ? dilate(grid, fr.active, cfg.guard) : fr.active;
                    report.peak_active = std::max(report.peak_active, active.size());

                    const TriangleMesh mesh = extract(grid, params, active);
                    const RenderBuffers gt = rasterize(target, cam, size, size);
                    const RenderBuffers pred = rasterize(mesh, cam, size, size);
                    RenderLoss rl = render_loss(pred, gt, cfg.loss);
                    loss += view_weight * rl.value;
                    if (mesh.empty())
                    {
                        ++report.empty_views;
                        continue;
                    }
                    for (auto & g : rl.d_depth) g *= view_weight;
                    for (auto & g : rl.d_normal) g *= view_weight;
                    const auto d_vertices = rasterize_backward(mesh, cam, pred, rl.d_depth, rl.d_normal);
                    grads += extract_backward(grid, params, mesh, d_vertices);
                }

            if (use_chamfer)
            {
                const TriangleMesh mesh = extract(grid, params);
                if (!mesh.empty())
                {
                    std::vector<Vec3> d_vertices(mesh.num_vertices(), Vec3::Zero());
                    loss += chamfer_term(mesh, *target_tree, cfg.chamfer_samples, rng(), 1.0, d_vertices);
                    grads += extract_backward(grid, params, mesh, d_vertices);
                }
            }

            if (cfg.loss.flex > 0.0)
            {
                FlexReg reg = flex_reg(grid, params, pairs, cfg.reg);
                loss += cfg.loss.flex * reg.value;
                reg.grad *= cfg.loss.flex;
                grads += reg.grad;
            }

            if (!std::isfinite(loss) || !std::isfinite(grads.max_abs()))
                throw NumericalError("fit: non-finite loss or gradient at iteration " + std::to_string(it));
            report.loss_trace.push_back(loss);
            const double progress = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 0.0;
            double scale = cfg.lr_final + (1.0 - cfg.lr_final) * 0.5 * (1.0 + std::cos(M_PI * progress));
            if (it < cfg.warmup) scale *= static_cast<double>(it + 1) / (cfg.warmup + 1);
            adam.step(params, grads, cfg, scale);
            clamp_params(params, grid);
        }

        out.mesh = extract(grid, params);
        report.final = score(out.mesh, target, cfg.eval_samples, cfg.seed);
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }
}  // namespace sparseflex
