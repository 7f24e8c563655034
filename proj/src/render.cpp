#include "sparseflex/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <png.h>

#include "sparseflex/parallel.hpp"

namespace sparseflex
{
    namespace
    {
        struct Hit
        {
            double t;      // depth along the ray (ray z = -1)
            double b1, b2; // barycentrics of vertices 1 and 2
        };

        // Moller-Trumbore from the camera origin, inclusive edges.
        bool intersect(const Vec3 & d, const Vec3 & a, const Vec3 & e1, const Vec3 & e2, Hit & hit)
        {
            const Vec3 p = d.cross(e2);
            const double det = e1.dot(p);
            if (det == 0.0) return false;
            const double inv = 1.0 / det;
            const Vec3 s = -a;
            const double u = s.dot(p) * inv;
            if (u < 0.0 || u > 1.0) return false;
            const Vec3 q = s.cross(e1);
            const double v = d.dot(q) * inv;
            if (v < 0.0 || u + v > 1.0) return false;
            hit = Hit{e2.dot(q) * inv, u, v};
            return true;
        }

        // Sutherland-Hodgman against -far <= z <= -near.
        int clip_depth(const std::array<Vec3, 3> & tri, double near, double far, std::array<Vec3, 9> & out)
        {
            std::array<Vec3, 9> buf_a, buf_b;
            int n = 3;
            for (int i = 0; i < 3; ++i) buf_a[i] = tri[i];
            auto clip = [](const std::array<Vec3, 9> & in, int count, std::array<Vec3, 9> & res, auto inside, auto cut) {
                int m = 0;
                for (int i = 0; i < count; ++i)
                {
                    const Vec3 & cur = in[i];
                    const Vec3 & nxt = in[(i + 1) % count];
                    const bool ci = inside(cur);
                    const bool ni = inside(nxt);
                    if (ci) res[m++] = cur;
                    if (ci != ni) res[m++] = cut(cur, nxt);
                }
                return m;
            };
            n = clip(buf_a, n, buf_b, [&](const Vec3 & p) { return p.z() <= -near; },
                     [&](const Vec3 & p, const Vec3 & q) {
                         const double s = (-near - p.z()) / (q.z() - p.z());
                         return Vec3(p + s * (q - p));
                     });
            if (n == 0) return 0;
            n = clip(buf_b, n, out, [&](const Vec3 & p) { return p.z() >= -far; },
                     [&](const Vec3 & p, const Vec3 & q) {
                         const double s = (-far - p.z()) / (q.z() - p.z());
                         return Vec3(p + s * (q - p));
                     });
            return n;
        }

        void write_png(const std::string & path, int width, int height, int channels, const std::vector<std::uint8_t> & data)
        {
            std::unique_ptr<FILE, int (*)(FILE *)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
            if (!fp) throw IoError("cannot open " + path + " for writing");
            png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
            png_infop info = png ? png_create_info_struct(png) : nullptr;
            if (!png || !info)
            {
                png_destroy_write_struct(&png, &info);
                throw IoError("libpng initialisation failed");
            }
            if (setjmp(png_jmpbuf(png)))
            {
                png_destroy_write_struct(&png, &info);
                throw IoError("failed writing " + path);
            }
            png_init_io(png, fp.get());
            png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                         PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
            png_write_info(png, info);
            for (int y = 0; y < height; ++y)
                png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * width * channels));
            png_write_end(png, nullptr);
            png_destroy_write_struct(&png, &info);
        }
    }  // namespace

    RenderBuffers RenderBuffers::background(int height, int width)
    {
        if (height < 1 || width < 1) throw std::invalid_argument("image size must be at least 1x1");
        RenderBuffers b;
        b.width = width;
        b.height = height;
        b.depth.assign(b.size(), kBackgroundDepth);
        b.normal.assign(b.size(), Vec3::Zero());
        b.mask.assign(b.size(), 0);
        b.face_id.assign(b.size(), -1);
        return b;
    }

    bool RenderBuffers::consistent() const
    {
        if (depth.size() != size() || normal.size() != size() || mask.size() != size() || face_id.size() != size())
            return false;
        for (std::size_t p = 0; p < size(); ++p)
        {
            const bool m = mask[p] == 1;
            if (mask[p] > 1) return false;
            if (m != (face_id[p] >= 0) || m != std::isfinite(depth[p])) return false;
            if (m && std::abs(normal[p].norm() - 1.0) > 1e-9) return false;
            if (!m && !normal[p].isZero(0.0)) return false;
        }
        return true;
    }

    Vec3 pixel_ray(const Camera & cam, int height, int width, int x, int y)
    {
        const double tan_y = std::tan(0.5 * cam.fov_y);
        const double tan_x = tan_y * cam.aspect;
        const double ndc_x = 2.0 * (x + 0.5) / width - 1.0;
        const double ndc_y = 1.0 - 2.0 * (y + 0.5) / height;
        return Vec3(ndc_x * tan_x, ndc_y * tan_y, -1.0);
    }

    RenderBuffers rasterize(const TriangleMesh & mesh, const Camera & cam, int height, int width)
    {
        cam.validate();
        RenderBuffers out = RenderBuffers::background(height, width);
        if (mesh.triangles.empty()) return out;

        std::vector<Vec3> verts(mesh.vertices.size());
        for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = cam.to_camera(mesh.vertices[i]);

        const double tan_y = std::tan(0.5 * cam.fov_y);
        const double tan_x = tan_y * cam.aspect;

        // Screen-space bounds of each clipped triangle; empty when fully clipped.
        struct Bounds
        {
            int x0, x1, y0, y1;
        };
        std::vector<Bounds> bounds(mesh.triangles.size());
        parallel_for(mesh.triangles.size(), [&](std::size_t b, std::size_t e) {
            for (std::size_t f = b; f < e; ++f)
            {
                const auto & tri = mesh.triangles[f];
                std::array<Vec3, 9> poly;
                const int n = clip_depth({verts[tri[0]], verts[tri[1]], verts[tri[2]]}, cam.near, cam.far, poly);
                Bounds bb{1, 0, 1, 0};
                if (n > 0)
                {
                    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
                    for (int i = 0; i < n; ++i)
                    {
                        const double depth = -poly[i].z();
                        const double px = (poly[i].x() / depth / tan_x + 1.0) * 0.5 * width - 0.5;
                        const double py = (1.0 - poly[i].y() / depth / tan_y) * 0.5 * height - 0.5;
                        xmin = std::min(xmin, px);
                        xmax = std::max(xmax, px);
                        ymin = std::min(ymin, py);
                        ymax = std::max(ymax, py);
                    }
                    // One pixel of slack absorbs rounding in the projection.
                    bb.x0 = static_cast<int>(std::clamp(std::floor(xmin), 0.0, static_cast<double>(width)));
                    bb.x1 = static_cast<int>(std::clamp(std::ceil(xmax), -1.0, width - 1.0));
                    bb.y0 = static_cast<int>(std::clamp(std::floor(ymin), 0.0, static_cast<double>(height)));
                    bb.y1 = static_cast<int>(std::clamp(std::ceil(ymax), -1.0, height - 1.0));
                }
                bounds[f] = bb;
            }
        });

        // Row bands are independent; the (depth, face id) ordering makes results schedule-free.
        parallel_for(static_cast<std::size_t>(height), [&](std::size_t row0, std::size_t row1) {
            for (std::size_t f = 0; f < mesh.triangles.size(); ++f)
            {
                const Bounds & bb = bounds[f];
                const int y0 = std::max<int>(bb.y0, static_cast<int>(row0));
                const int y1 = std::min<int>(bb.y1, static_cast<int>(row1) - 1);
                if (bb.x0 > bb.x1 || y0 > y1) continue;
                const auto & tri = mesh.triangles[f];
                const Vec3 & a = verts[tri[0]];
                const Vec3 e1 = verts[tri[1]] - a;
                const Vec3 e2 = verts[tri[2]] - a;
                Vec3 normal = e1.cross(e2);
                const double len = normal.norm();
                if (len == 0.0) continue;
                normal /= len;
                if (normal.dot(a) > 0.0) normal = -normal;
                for (int y = y0; y <= y1; ++y)
                    for (int x = bb.x0; x <= bb.x1; ++x)
                    {
                        Hit hit;
                        const Vec3 ray((2.0 * (x + 0.5) / width - 1.0) * tan_x, (1.0 - 2.0 * (y + 0.5) / height) * tan_y, -1.0);
                        if (!intersect(ray, a, e1, e2, hit)) continue;
                        if (hit.t < cam.near || hit.t > cam.far) continue;
                        const std::size_t p = static_cast<std::size_t>(y) * width + x;
                        const auto id = static_cast<std::int32_t>(f);
                        if (hit.t < out.depth[p] || (hit.t == out.depth[p] && id < out.face_id[p]))
                        {
                            out.depth[p] = hit.t;
                            out.face_id[p] = id;
                            out.normal[p] = normal;
                            out.mask[p] = 1;
                        }
                    }
            }
        }, 8);
        return out;
    }

    std::vector<Vec3> rasterize_backward(const TriangleMesh & mesh, const Camera & cam, const RenderBuffers & buffers,
                                         std::span<const double> d_depth, std::span<const Vec3> d_normal)
    {
        if (d_depth.size() != buffers.size() || d_normal.size() != buffers.size())
            throw std::invalid_argument("rasterize_backward: gradient images must match the buffers");
        if (buffers.face_id.size() != buffers.size())
            throw std::logic_error("rasterize_backward: malformed buffers");

        const Mat3 r = cam.rotation();
        std::vector<Vec3> verts(mesh.vertices.size());
        for (std::size_t i = 0; i < verts.size(); ++i) verts[i] = cam.to_camera(mesh.vertices[i]);

        std::vector<Vec3> grad(mesh.vertices.size(), Vec3::Zero());
        for (int y = 0; y < buffers.height; ++y)
            for (int x = 0; x < buffers.width; ++x)
            {
                const std::size_t p = static_cast<std::size_t>(y) * buffers.width + x;
                const std::int32_t f = buffers.face_id[p];
                if (f < 0) continue;
                if (static_cast<std::size_t>(f) >= mesh.triangles.size())
                    throw std::logic_error("rasterize_backward: buffer references a face the mesh does not have");
                const double gd = d_depth[p];
                const Vec3 & gn = d_normal[p];
                if (gd == 0.0 && gn.isZero(0.0)) continue;

                const auto & tri = mesh.triangles[f];
                const Vec3 & a = verts[tri[0]];
                const Vec3 e1 = verts[tri[1]] - a;
                const Vec3 e2 = verts[tri[2]] - a;
                const Vec3 n = e1.cross(e2);
                const double len = n.norm();
                if (len == 0.0) continue;
                const Vec3 d = pixel_ray(cam, buffers.height, buffers.width, x, y);

                std::array<Vec3, 3> g{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
                if (gd != 0.0)
                {
                    const double denom = n.dot(d);
                    if (denom != 0.0)
                    {
                        // Barycentrics of the ray hit, without the inside test (coverage is frozen).
                        const Vec3 pv = d.cross(e2);
                        const double inv = 1.0 / e1.dot(pv);
                        const Vec3 s = -a;
                        const double b1 = s.dot(pv) * inv;
                        const double b2 = d.dot(s.cross(e1)) * inv;
                        const Vec3 dt = (gd / denom) * n;
                        g[0] += (1.0 - b1 - b2) * dt;
                        g[1] += b1 * dt;
                        g[2] += b2 * dt;
                    }
                }
                if (!gn.isZero(0.0))
                {
                    const Vec3 nhat = n / len;
                    const double sign = nhat.dot(a) > 0.0 ? -1.0 : 1.0;
                    const Vec3 gN = sign * (gn - nhat * nhat.dot(gn)) / len;
                    const Vec3 g1 = e2.cross(gN);
                    const Vec3 g2 = gN.cross(e1);
                    g[1] += g1;
                    g[2] += g2;
                    g[0] -= g1 + g2;
                }
                for (int k = 0; k < 3; ++k) grad[tri[k]] += g[k];
            }

        for (auto & g : grad) g = r.transpose() * g;
        return grad;
    }

    void write_depth_pfm(const std::string & path, const RenderBuffers & buffers)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out << "Pf\n" << buffers.width << " " << buffers.height << "\n-1.0\n";
        // PFM rows run bottom to top.
        for (int y = buffers.height - 1; y >= 0; --y)
            for (int x = 0; x < buffers.width; ++x)
            {
                const float v = static_cast<float>(buffers.depth[static_cast<std::size_t>(y) * buffers.width + x]);
                out.write(reinterpret_cast<const char *>(&v), sizeof(float));
            }
        if (!out) throw IoError("failed writing " + path);
    }

    void write_normal_png(const std::string & path, const RenderBuffers & buffers)
    {
        std::vector<std::uint8_t> data(buffers.size() * 3, 0);
        for (std::size_t p = 0; p < buffers.size(); ++p)
        {
            if (!buffers.mask[p]) continue;
            for (int c = 0; c < 3; ++c)
                data[3 * p + c] = static_cast<std::uint8_t>(std::lround(std::clamp((buffers.normal[p][c] + 1.0) * 127.5, 0.0, 255.0)));
        }
        write_png(path, buffers.width, buffers.height, 3, data);
    }

    void write_mask_png(const std::string & path, const RenderBuffers & buffers)
    {
        std::vector<std::uint8_t> data(buffers.size());
        for (std::size_t p = 0; p < buffers.size(); ++p) data[p] = buffers.mask[p] ? 255 : 0;
        write_png(path, buffers.width, buffers.height, 1, data);
    }
}  // namespace sparseflex
