#include "sparseflex/meshio.hpp"
#include "sparseflex/morton.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <unordered_map>
#include <random>
#include <sstream>

namespace sparseflex
{
    namespace
    {
        std::string extension(const std::string & path)
        {
            const auto dot = path.find_last_of('.');
            if (dot == std::string::npos) return {};
            std::string ext = path.substr(dot + 1);
            std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
            return ext;
        }

        enum class PlyType
        {
            Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64
        };

        PlyType ply_type(const std::string & name, std::size_t line)
        {
            if (name == "char" || name == "int8") return PlyType::Int8;
            if (name == "uchar" || name == "uint8") return PlyType::UInt8;
            if (name == "short" || name == "int16") return PlyType::Int16;
            if (name == "ushort" || name == "uint16") return PlyType::UInt16;
            if (name == "int" || name == "int32") return PlyType::Int32;
            if (name == "uint" || name == "uint32") return PlyType::UInt32;
            if (name == "float" || name == "float32") return PlyType::Float32;
            if (name == "double" || name == "float64") return PlyType::Float64;
            throw ParseError("unknown PLY property type '" + name + "'", line);
        }

        std::size_t ply_size(PlyType t)
        {
            switch (t)
            {
            case PlyType::Int8:
            case PlyType::UInt8: return 1;
            case PlyType::Int16:
            case PlyType::UInt16: return 2;
            case PlyType::Int32:
            case PlyType::UInt32:
            case PlyType::Float32: return 4;
            case PlyType::Float64: return 8;
            }
            return 0;
        }

        double ply_read(std::istream & in, PlyType t, std::size_t & offset)
        {
            char buf[8];
            const auto n = ply_size(t);
            in.read(buf, static_cast<std::streamsize>(n));
            if (in.gcount() != static_cast<std::streamsize>(n)) throw ParseError("truncated PLY body", offset);
            offset += n;
            auto as = [&](auto v) {
                std::memcpy(&v, buf, sizeof(v));
                return static_cast<double>(v);
            };
            switch (t)
            {
            case PlyType::Int8: return as(std::int8_t{});
            case PlyType::UInt8: return as(std::uint8_t{});
            case PlyType::Int16: return as(std::int16_t{});
            case PlyType::UInt16: return as(std::uint16_t{});
            case PlyType::Int32: return as(std::int32_t{});
            case PlyType::UInt32: return as(std::uint32_t{});
            case PlyType::Float32: return as(float{});
            case PlyType::Float64: return as(double{});
            }
            return 0.0;
        }

        struct PlyProperty
        {
            std::string name;
            bool is_list = false;
            PlyType count_type = PlyType::UInt8;
            PlyType type = PlyType::Float32;
        };

        struct PlyElement
        {
            std::string name;
            std::size_t count = 0;
            std::vector<PlyProperty> props;
        };

        // Parses one OBJ face index token ("7", "7/2", "7//3", "-1") into a 0-based index.
        std::uint32_t obj_index(const std::string & token, std::size_t vertex_count, std::size_t line)
        {
            const auto slash = token.find('/');
            const std::string head = token.substr(0, slash);
            long long idx = 0;
            const auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
            if (res.ec != std::errc() || res.ptr != head.data() + head.size() || idx == 0)
                throw ParseError("bad face index '" + token + "'", line);
            if (idx < 0) idx += static_cast<long long>(vertex_count) + 1;
            if (idx < 1 || static_cast<std::size_t>(idx) > vertex_count)
                throw ParseError("face index out of range '" + token + "'", line);
            return static_cast<std::uint32_t>(idx - 1);
        }
    }  // namespace

    TriangleMesh load_obj(std::istream & in)
    {
        TriangleMesh mesh;
        std::string raw;
        std::size_t line = 0;
        while (std::getline(in, raw))
        {
            ++line;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            std::istringstream ss(raw);
            std::string tag;
            if (!(ss >> tag) || tag[0] == '#') continue;
            if (tag == "v")
            {
                Vec3 p;
                if (!(ss >> p.x() >> p.y() >> p.z())) throw ParseError("malformed vertex record", line);
                mesh.vertices.push_back(p);
            }
            else if (tag == "f")
            {
                std::vector<std::uint32_t> poly;
                std::string token;
                while (ss >> token) poly.push_back(obj_index(token, mesh.vertices.size(), line));
                if (poly.size() < 3) throw ParseError("face with fewer than three vertices", line);
                for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
            }
        }
        return mesh;
    }

    TriangleMesh load_ply(std::istream & in)
    {
        std::string raw;
        std::size_t line = 0;
        std::size_t offset = 0;
        auto next_line = [&]() {
            if (!std::getline(in, raw)) throw ParseError("unexpected end of PLY header", line);
            ++line;
            offset += raw.size() + 1;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        };

        next_line();
        if (raw != "ply") throw ParseError("missing 'ply' magic", 1);
        std::vector<PlyElement> elements;
        bool format_ok = false;
        while (true)
        {
            next_line();
            std::istringstream ss(raw);
            std::string tag;
            ss >> tag;
            if (tag == "format")
            {
                std::string fmt;
                ss >> fmt;
                if (fmt != "binary_little_endian") throw ParseError("only binary_little_endian PLY is supported", line);
                format_ok = true;
            }
            else if (tag == "element")
            {
                PlyElement e;
                if (!(ss >> e.name >> e.count)) throw ParseError("malformed element line", line);
                elements.push_back(e);
            }
            else if (tag == "property")
            {
                if (elements.empty()) throw ParseError("property before any element", line);
                PlyProperty p;
                std::string type;
                ss >> type;
                if (type == "list")
                {
                    std::string ct, it;
                    ss >> ct >> it >> p.name;
                    p.is_list = true;
                    p.count_type = ply_type(ct, line);
                    p.type = ply_type(it, line);
                }
                else
                {
                    p.type = ply_type(type, line);
                    ss >> p.name;
                }
                elements.back().props.push_back(p);
            }
            else if (tag == "end_header")
                break;
            else if (tag == "comment" || tag == "obj_info" || tag.empty())
                continue;
            else
                throw ParseError("unknown PLY header line '" + raw + "'", line);
        }
        if (!format_ok) throw ParseError("PLY header lacks a format line", line);

        TriangleMesh mesh;
        for (const auto & e : elements)
        {
            if (e.name == "vertex")
            {
                int ix = -1, iy = -1, iz = -1;
                for (std::size_t k = 0; k < e.props.size(); ++k)
                {
                    if (e.props[k].name == "x") ix = static_cast<int>(k);
                    if (e.props[k].name == "y") iy = static_cast<int>(k);
                    if (e.props[k].name == "z") iz = static_cast<int>(k);
                }
                if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", offset);
                mesh.vertices.reserve(e.count);
                for (std::size_t v = 0; v < e.count; ++v)
                {
                    Vec3 p = Vec3::Zero();
                    for (std::size_t k = 0; k < e.props.size(); ++k)
                    {
                        const auto & prop = e.props[k];
                        if (prop.is_list)
                        {
                            const auto n = static_cast<std::size_t>(ply_read(in, prop.count_type, offset));
                            for (std::size_t i = 0; i < n; ++i) ply_read(in, prop.type, offset);
                            continue;
                        }
                        const double x = ply_read(in, prop.type, offset);
                        if (static_cast<int>(k) == ix) p.x() = x;
                        if (static_cast<int>(k) == iy) p.y() = x;
                        if (static_cast<int>(k) == iz) p.z() = x;
                    }
                    mesh.vertices.push_back(p);
                }
            }
            else
            {
                for (std::size_t f = 0; f < e.count; ++f)
                    for (const auto & prop : e.props)
                    {
                        if (!prop.is_list)
                        {
                            ply_read(in, prop.type, offset);
                            continue;
                        }
                        const std::size_t at = offset;
                        const auto n = static_cast<std::size_t>(ply_read(in, prop.count_type, offset));
                        std::vector<std::uint32_t> poly(n);
                        for (auto & idx : poly)
                        {
                            const double x = ply_read(in, prop.type, offset);
                            if (x < 0 || x >= static_cast<double>(mesh.vertices.size()))
                                throw ParseError("face index out of range", at);
                            idx = static_cast<std::uint32_t>(x);
                        }
                        if (e.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index"))
                        {
                            if (n < 3) throw ParseError("face with fewer than three vertices", at);
                            for (std::size_t i = 1; i + 1 < n; ++i) mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
                        }
                    }
            }
        }
        return mesh;
    }

    TriangleMesh load_mesh(const std::string & path)
    {
        const auto ext = extension(path);
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        if (ext == "obj") return load_obj(in);
        if (ext == "ply") return load_ply(in);
        throw std::invalid_argument("unsupported mesh extension '." + ext + "'");
    }

    void save_obj(const TriangleMesh & mesh, std::ostream & out)
    {
        out << std::setprecision(17);
        for (const auto & v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        for (const auto & t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }

    void save_ply(const TriangleMesh & mesh, std::ostream & out)
    {
        out << "ply\nformat binary_little_endian 1.0\n"
            << "element vertex " << mesh.vertices.size() << "\nproperty double x\nproperty double y\nproperty double z\n"
            << "element face " << mesh.triangles.size() << "\nproperty list uchar uint vertex_indices\nend_header\n";
        for (const auto & v : mesh.vertices)
            for (int d = 0; d < 3; ++d)
            {
                const double x = v[d];
                out.write(reinterpret_cast<const char *>(&x), sizeof(double));
            }
        for (const auto & t : mesh.triangles)
        {
            const std::uint8_t n = 3;
            out.write(reinterpret_cast<const char *>(&n), 1);
            out.write(reinterpret_cast<const char *>(t.data()), 3 * sizeof(std::uint32_t));
        }
    }

    void save_mesh(const TriangleMesh & mesh, const std::string & path)
    {
        const auto ext = extension(path);
        if (ext != "obj" && ext != "ply") throw std::invalid_argument("unsupported mesh extension '." + ext + "'");
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path + " for writing");
        if (ext == "obj") save_obj(mesh, out);
        else save_ply(mesh, out);
        if (!out) throw IoError("failed writing " + path);
    }

    std::pair<TriangleMesh, NormalizeTransform> normalize_mesh(const TriangleMesh & mesh)
    {
        if (mesh.vertices.empty()) throw std::invalid_argument("cannot normalize an empty mesh");
        Vec3 lo = mesh.vertices.front(), hi = mesh.vertices.front();
        for (const auto & v : mesh.vertices)
        {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
        const double half = 0.5 * (hi - lo).maxCoeff();
        if (!(half > 0.0)) throw std::invalid_argument("cannot normalize a zero-extent mesh");
        NormalizeTransform t;
        t.center = 0.5 * (lo + hi);
        t.scale = 0.95 / half;
        return {transformed(mesh, t), t};
    }

    TriangleMesh transformed(const TriangleMesh & mesh, const NormalizeTransform & t)
    {
        TriangleMesh out = mesh;
        for (auto & v : out.vertices) v = t.apply(v);
        return out;
    }

    double surface_area(const TriangleMesh & mesh)
    {
        double a = 0.0;
        for (const auto & t : mesh.triangles)
            a += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
        return a;
    }

    double signed_volume(const TriangleMesh & mesh)
    {
        double v = 0.0;
        for (const auto & t : mesh.triangles)
            v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
        return v / 6.0;
    }

    PointCloud sample_surface(const TriangleMesh & mesh, std::size_t n, std::uint64_t seed)
    {
        return sample_surface_with_faces(mesh, n, seed).cloud;
    }

    SurfaceSamples sample_surface_with_faces(const TriangleMesh & mesh, std::size_t n, std::uint64_t seed)
    {
        if (n < 1) throw std::invalid_argument("sample_surface: need at least one sample");
        std::vector<double> cumulative(mesh.triangles.size());
        std::vector<Vec3> normals(mesh.triangles.size(), Vec3::Zero());
        double total = 0.0;
        for (std::size_t f = 0; f < mesh.triangles.size(); ++f)
        {
            const auto & t = mesh.triangles[f];
            const Vec3 cr = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
            const double len = cr.norm();
            if (len > 0.0) normals[f] = cr / len;
            total += 0.5 * len;
            cumulative[f] = total;
        }
        if (!(total > 0.0)) throw std::invalid_argument("sample_surface: mesh has zero surface area");

        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        SurfaceSamples out;
        auto & pc = out.cloud;
        pc.points.reserve(n);
        pc.normals.reserve(n);
        out.face.reserve(n);
        out.bary.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
        {
            const double pick = uni(rng) * total;
            auto f = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
            f = std::min(f, cumulative.size() - 1);
            // Skip zero-area faces that upper_bound can land on at the ends.
            while (normals[f].isZero(0.0) && f > 0) --f;
            const double r = std::sqrt(uni(rng));
            const double s = uni(rng);
            const auto & t = mesh.triangles[f];
            pc.points.push_back((1.0 - r) * mesh.vertices[t[0]] + r * (1.0 - s) * mesh.vertices[t[1]] + r * s * mesh.vertices[t[2]]);
            pc.normals.push_back(normals[f]);
            out.face.push_back(static_cast<std::uint32_t>(f));
            out.bary.push_back({r * (1.0 - s), r * s});
        }
        return out;
    }

    void save_points(const PointCloud & pc, const std::string & path)
    {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path + " for writing");
        out << std::setprecision(17);
        for (std::size_t i = 0; i < pc.size(); ++i)
        {
            const auto & p = pc.points[i];
            out << p.x() << ' ' << p.y() << ' ' << p.z();
            if (pc.has_normals()) out << ' ' << pc.normals[i].x() << ' ' << pc.normals[i].y() << ' ' << pc.normals[i].z();
            out << '\n';
        }
    }

    PointCloud load_points(const std::string & path)
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        PointCloud pc;
        std::string raw;
        std::size_t line = 0;
        int columns = -1;
        while (std::getline(in, raw))
        {
            ++line;
            std::istringstream ss(raw);
            std::vector<double> values;
            double x;
            while (ss >> x) values.push_back(x);
            if (values.empty()) continue;
            if (values.size() != 3 && values.size() != 6) throw ParseError("expected 3 or 6 columns", line);
            if (columns >= 0 && static_cast<int>(values.size()) != columns) throw ParseError("inconsistent column count", line);
            columns = static_cast<int>(values.size());
            pc.points.emplace_back(values[0], values[1], values[2]);
            if (columns == 6) pc.normals.emplace_back(values[3], values[4], values[5]);
        }
        return pc;
    }
}  // namespace sparseflex

namespace sparseflex
{
    Vec3 closest_point_on_triangle(const Vec3 & p, const Vec3 & a, const Vec3 & b, const Vec3 & c, TriFeature * feature)
    {
        auto at = [&](TriFeature f, const Vec3 & q) {
            if (feature) *feature = f;
            return q;
        };
        const Vec3 ab = b - a, ac = c - a, ap = p - a;
        const double d1 = ab.dot(ap), d2 = ac.dot(ap);
        if (d1 <= 0.0 && d2 <= 0.0) return at(TriFeature::VertexA, a);
        const Vec3 bp = p - b;
        const double d3 = ab.dot(bp), d4 = ac.dot(bp);
        if (d3 >= 0.0 && d4 <= d3) return at(TriFeature::VertexB, b);
        const double vc = d1 * d4 - d3 * d2;
        if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return at(TriFeature::EdgeAB, a + (d1 / (d1 - d3)) * ab);
        const Vec3 cp = p - c;
        const double d5 = ab.dot(cp), d6 = ac.dot(cp);
        if (d6 >= 0.0 && d5 <= d6) return at(TriFeature::VertexC, c);
        const double vb = d5 * d2 - d1 * d6;
        if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return at(TriFeature::EdgeCA, a + (d2 / (d2 - d6)) * ac);
        const double va = d3 * d6 - d5 * d4;
        if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
            return at(TriFeature::EdgeBC, b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b));
        const double denom = 1.0 / (va + vb + vc);
        return at(TriFeature::Face, a + ab * (vb * denom) + ac * (vc * denom));
    }

    double distance_to_mesh(const Vec3 & p, const TriangleMesh & mesh)
    {
        double best = std::numeric_limits<double>::infinity();
        for (const auto & t : mesh.triangles)
            best = std::min(best, (p - closest_point_on_triangle(p, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]])).squaredNorm());
        return std::sqrt(best);
    }

    SparseGrid voxelize_mesh(const TriangleMesh & mesh, std::uint32_t resolution, const Box & domain, double band,
                             bool trim_boundary)
    {
        if (resolution < 1 || resolution > kMaxResolution) throw std::out_of_range("resolution out of range");
        if (!(band > 0.0)) throw std::invalid_argument("voxelize_mesh: band must be positive");
        mesh.validate();
        const Vec3 h = domain.extent() / static_cast<double>(resolution);
        const double radius = band * h.maxCoeff();
        const double r2 = radius * radius;

        // Open-boundary census: edges with one incident face and their vertices.
        std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_count;
        for (const auto & t : mesh.triangles)
            for (int k = 0; k < 3; ++k) ++edge_count[{std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])}];
        std::vector<std::uint8_t> rim_vertex(mesh.num_vertices(), 0);
        auto rim_edge = [&](std::uint32_t a, std::uint32_t b) {
            return edge_count[{std::min(a, b), std::max(a, b)}] == 1;
        };
        for (const auto & [e, n] : edge_count)
            if (n == 1) rim_vertex[e.first] = rim_vertex[e.second] = 1;

        struct Nearest
        {
            double d2;
            bool on_rim;
        };
        std::unordered_map<std::uint64_t, Nearest> cells;
        for (const auto & t : mesh.triangles)
        {
            const Vec3 & a = mesh.vertices[t[0]];
            const Vec3 & b = mesh.vertices[t[1]];
            const Vec3 & c = mesh.vertices[t[2]];
            const Vec3 lo = a.cwiseMin(b).cwiseMin(c).array() - radius;
            const Vec3 hi = a.cwiseMax(b).cwiseMax(c).array() + radius;
            std::array<std::int64_t, 3> i0, i1;
            for (int d = 0; d < 3; ++d)
            {
                // Centers at min + (i + 0.5) h.
                const double f0 = (lo[d] - domain.min[d]) / h[d] - 0.5;
                const double f1 = (hi[d] - domain.min[d]) / h[d] - 0.5;
                i0[d] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(std::max(f0, -1.0))));
                i1[d] = std::min<std::int64_t>(resolution - 1,
                                               static_cast<std::int64_t>(std::floor(std::min(f1, static_cast<double>(resolution)))));
            }
            for (auto k = i0[2]; k <= i1[2]; ++k)
                for (auto j = i0[1]; j <= i1[1]; ++j)
                    for (auto i = i0[0]; i <= i1[0]; ++i)
                    {
                        const Vec3 center = domain.min + (Vec3(i, j, k).array() + 0.5).matrix().cwiseProduct(h);
                        TriFeature f;
                        const double d2 = (center - closest_point_on_triangle(center, a, b, c, &f)).squaredNorm();
                        if (d2 > r2) continue;
                        bool on_rim = false;
                        switch (f)
                        {
                        case TriFeature::Face: break;
                        case TriFeature::VertexA: on_rim = rim_vertex[t[0]]; break;
                        case TriFeature::VertexB: on_rim = rim_vertex[t[1]]; break;
                        case TriFeature::VertexC: on_rim = rim_vertex[t[2]]; break;
                        case TriFeature::EdgeAB: on_rim = rim_edge(t[0], t[1]); break;
                        case TriFeature::EdgeBC: on_rim = rim_edge(t[1], t[2]); break;
                        case TriFeature::EdgeCA: on_rim = rim_edge(t[2], t[0]); break;
                        }
                        const auto code = morton::encode(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                                         static_cast<std::uint32_t>(k));
                        auto [it, fresh] = cells.try_emplace(code, Nearest{d2, on_rim});
                        // Closer feature wins; at equal distance an interior feature wins.
                        if (!fresh && (d2 < it->second.d2 || (d2 == it->second.d2 && !on_rim))) it->second = {d2, on_rim};
                    }
        }

        std::vector<VoxelCoord> coords;
        coords.reserve(cells.size());
        const double tiny = 1e-24 * h.squaredNorm();
        for (const auto & [code, n] : cells)
            if (!trim_boundary || !n.on_rim || n.d2 <= tiny)
            {
                VoxelCoord v;
                morton::decode(code, v.i, v.j, v.k);
                coords.push_back(v);
            }
        return build_grid(coords, resolution, domain);
    }
}  // namespace sparseflex
