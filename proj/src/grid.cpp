#include "sparseflex/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "sparseflex/morton.hpp"

namespace sparseflex
{
    namespace
    {
        // Open-addressing map from 64-bit codes to dense ids. Linear probing, power-of-two table.
        class CodeTable
        {
        public:
            explicit CodeTable(std::size_t expected)
            {
                std::size_t cap = 16;
                while (cap < expected * 2) cap <<= 1;
                keys_.assign(cap, kEmpty);
                values_.resize(cap);
                mask_ = cap - 1;
            }

            // Returns the stored id, inserting `next` when the key is new.
            std::uint32_t find_or_insert(std::uint64_t key, std::uint32_t next, bool & inserted)
            {
                std::size_t slot = hash(key) & mask_;
                while (true)
                {
                    if (keys_[slot] == key)
                    {
                        inserted = false;
                        return values_[slot];
                    }
                    if (keys_[slot] == kEmpty)
                    {
                        keys_[slot] = key;
                        values_[slot] = next;
                        inserted = true;
                        return next;
                    }
                    slot = (slot + 1) & mask_;
                }
            }

        private:
            static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

            static std::size_t hash(std::uint64_t k)
            {
                k ^= k >> 33;
                k *= 0xff51afd7ed558ccdULL;
                k ^= k >> 33;
                return static_cast<std::size_t>(k);
            }

            std::vector<std::uint64_t> keys_;
            std::vector<std::uint32_t> values_;
            std::size_t mask_ = 0;
        };

        constexpr char kGridMagic[8] = {'S', 'F', 'G', 'R', 'I', 'D', '\0', '\0'};
        constexpr std::uint32_t kGridVersion = 1;

        static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

        template <typename T>
        void put(std::ostream & out, const T & v)
        {
            out.write(reinterpret_cast<const char *>(&v), sizeof(T));
        }

        template <typename T>
        T get(std::istream & in, std::size_t & offset, const char * what)
        {
            T v{};
            in.read(reinterpret_cast<char *>(&v), sizeof(T));
            if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
                throw ParseError(std::string("truncated grid file while reading ") + what, offset);
            offset += sizeof(T);
            return v;
        }
    }  // namespace

    void PointCloud::validate() const
    {
        if (normals.empty()) return;
        if (normals.size() != points.size())
            throw std::invalid_argument("point cloud: normals and points differ in length");
        for (const auto & n : normals)
            if (std::abs(n.norm() - 1.0) > 1e-6)
                throw std::invalid_argument("point cloud: normal is not unit length");
    }

    EdgeId LatticeEdge::id() const
    {
        return morton::encode(origin.i, origin.j, origin.k) * 3 + static_cast<EdgeId>(axis);
    }

    LatticeEdge LatticeEdge::from_id(EdgeId id)
    {
        LatticeEdge e;
        e.axis = static_cast<int>(id % 3);
        morton::decode(id / 3, e.origin.i, e.origin.j, e.origin.k);
        return e;
    }

    LatticeEdge LatticeEdge::from_corners(const VoxelCoord & a, const VoxelCoord & b, std::uint32_t resolution)
    {
        int axis = -1;
        for (int d = 0; d < 3; ++d)
        {
            if (a[d] == b[d]) continue;
            const auto lo = std::min(a[d], b[d]);
            const auto hi = std::max(a[d], b[d]);
            if (hi - lo != 1 || axis != -1)
                throw std::invalid_argument("lattice edge endpoints must differ by one step along exactly one axis");
            axis = d;
        }
        if (axis < 0) throw std::invalid_argument("lattice edge endpoints coincide");
        for (int d = 0; d < 3; ++d)
            if (a[d] > resolution || b[d] > resolution)
                throw std::invalid_argument("lattice edge endpoint outside the corner lattice");
        LatticeEdge e;
        e.axis = axis;
        e.origin = a[axis] < b[axis] ? a : b;
        return e;
    }

    Vec3 SparseGrid::lattice_point(const VoxelCoord & p) const
    {
        const Vec3 cell = cell_size();
        return domain_.min + Vec3(p.i * cell.x(), p.j * cell.y(), p.k * cell.z());
    }

    Vec3 SparseGrid::voxel_center(VoxelId v) const
    {
        const Vec3 cell = cell_size();
        const auto & c = voxels_[v];
        return domain_.min + Vec3((c.i + 0.5) * cell.x(), (c.j + 0.5) * cell.y(), (c.k + 0.5) * cell.z());
    }

    Vec3 SparseGrid::corner_position(CornerId c) const
    {
        return lattice_point(corner_coords_[c]);
    }

    std::optional<VoxelId> SparseGrid::find(const VoxelCoord & c) const
    {
        if (c.i >= resolution_ || c.j >= resolution_ || c.k >= resolution_) return std::nullopt;
        const std::uint64_t key = morton::encode(c.i, c.j, c.k);
        const auto it = std::lower_bound(codes_.begin(), codes_.end(), key);
        if (it == codes_.end() || *it != key) return std::nullopt;
        return static_cast<VoxelId>(it - codes_.begin());
    }

    std::optional<VoxelId> SparseGrid::find(std::int64_t i, std::int64_t j, std::int64_t k) const
    {
        if (i < 0 || j < 0 || k < 0) return std::nullopt;
        return find(VoxelCoord{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)});
    }

    std::size_t SparseGrid::memory_bytes() const
    {
        return voxels_.size() * sizeof(VoxelCoord) + codes_.size() * sizeof(std::uint64_t)
            + voxel_corners_.size() * sizeof(std::array<CornerId, 8>) + corner_coords_.size() * sizeof(VoxelCoord);
    }

    SparseGrid build_grid(std::span<const VoxelCoord> coords, std::uint32_t resolution, const Box & domain)
    {
        if (resolution < 1 || resolution > kMaxResolution)
            throw std::invalid_argument("grid resolution must be in [1, " + std::to_string(kMaxResolution) + "]");
        if (!((domain.max.array() > domain.min.array()).all()))
            throw std::invalid_argument("grid domain must have positive extent");

        std::vector<std::pair<std::uint64_t, VoxelCoord>> keyed;
        keyed.reserve(coords.size());
        for (const auto & c : coords)
        {
            if (c.i >= resolution || c.j >= resolution || c.k >= resolution)
                throw std::out_of_range("voxel coordinate outside [0, N_r)^3");
            keyed.emplace_back(morton::encode(c.i, c.j, c.k), c);
        }
        std::sort(keyed.begin(), keyed.end(), [](const auto & a, const auto & b) { return a.first < b.first; });
        keyed.erase(std::unique(keyed.begin(), keyed.end(), [](const auto & a, const auto & b) { return a.first == b.first; }),
                    keyed.end());

        SparseGrid g;
        g.resolution_ = resolution;
        g.domain_ = domain;
        g.voxels_.reserve(keyed.size());
        g.codes_.reserve(keyed.size());
        for (const auto & [code, c] : keyed)
        {
            g.codes_.push_back(code);
            g.voxels_.push_back(c);
        }

        g.voxel_corners_.resize(g.voxels_.size());
        CodeTable table(g.voxels_.size() * 8);  // upper bound on distinct corners
        for (std::size_t v = 0; v < g.voxels_.size(); ++v)
        {
            const auto & c = g.voxels_[v];
            for (int local = 0; local < 8; ++local)
            {
                const VoxelCoord p{c.i + (local & 1), c.j + ((local >> 1) & 1), c.k + ((local >> 2) & 1)};
                bool inserted = false;
                const auto next = static_cast<CornerId>(g.corner_coords_.size());
                const auto id = table.find_or_insert(morton::encode(p.i, p.j, p.k), next, inserted);
                if (inserted) g.corner_coords_.push_back(p);
                g.voxel_corners_[v][local] = id;
            }
        }
        return g;
    }

    VoxelCoord cell_of(const Vec3 & p, std::uint32_t resolution, const Box & domain)
    {
        if (!domain.contains(p)) throw std::out_of_range("point outside grid domain");
        VoxelCoord c;
        const Vec3 rel = (p - domain.min).cwiseQuotient(domain.extent()) * static_cast<double>(resolution);
        for (int d = 0; d < 3; ++d)
        {
            const auto idx = static_cast<std::int64_t>(std::floor(rel[d]));
            c[d] = static_cast<std::uint32_t>(std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(resolution) - 1));
        }
        return c;
    }

    SparseGrid voxelize_points(const PointCloud & pc, std::uint32_t resolution, const Box & domain)
    {
        if (resolution < 1 || resolution > kMaxResolution)
            throw std::invalid_argument("grid resolution must be in [1, " + std::to_string(kMaxResolution) + "]");
        std::vector<VoxelCoord> cells;
        cells.reserve(pc.points.size());
        for (const auto & p : pc.points) cells.push_back(cell_of(p, resolution, domain));
        return build_grid(cells, resolution, domain);
    }

    SparseGrid subset(const SparseGrid & grid, std::span<const VoxelId> ids)
    {
        std::vector<VoxelCoord> coords;
        coords.reserve(ids.size());
        for (const auto v : ids)
        {
            if (v >= grid.num_voxels()) throw std::out_of_range("voxel id out of range");
            coords.push_back(grid.voxel(v));
        }
        return build_grid(coords, grid.resolution(), grid.domain());
    }

    std::array<std::optional<VoxelId>, 4> edge_ring(const SparseGrid & grid, const LatticeEdge & edge)
    {
        const auto n = grid.resolution();
        if (edge.axis < 0 || edge.axis > 2)
            throw std::invalid_argument("lattice edge axis must be 0, 1 or 2");
        if (edge.origin.i > n || edge.origin.j > n || edge.origin.k > n || edge.origin[edge.axis] >= n)
            throw std::invalid_argument("lattice edge outside the corner lattice");

        const int u = (edge.axis + 1) % 3;
        const int v = (edge.axis + 2) % 3;
        constexpr int kOffsets[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        std::array<std::optional<VoxelId>, 4> ring;
        for (int r = 0; r < 4; ++r)
        {
            std::int64_t c[3] = {edge.origin.i, edge.origin.j, edge.origin.k};
            c[u] -= kOffsets[r][0];
            c[v] -= kOffsets[r][1];
            ring[r] = grid.find(c[0], c[1], c[2]);
        }
        return ring;
    }

    std::vector<VoxelId> edge_adjacent_voxels(const SparseGrid & grid, const LatticeEdge & edge)
    {
        std::vector<VoxelId> out;
        for (const auto & cell : edge_ring(grid, edge))
            if (cell) out.push_back(*cell);
        return out;
    }

    const std::array<LocalEdge, 12> & local_edges()
    {
        static const std::array<LocalEdge, 12> table = [] {
            std::array<LocalEdge, 12> t{};
            for (int axis = 0; axis < 3; ++axis)
            {
                const int u = (axis + 1) % 3;
                const int v = (axis + 2) % 3;
                for (int b = 0; b < 4; ++b)
                {
                    const int lo = ((b & 1) << u) | (((b >> 1) & 1) << v);
                    t[4 * axis + b] = LocalEdge{axis, lo, lo | (1 << axis)};
                }
            }
            return t;
        }();
        return table;
    }

    std::vector<std::array<CornerId, 2>> corner_edge_pairs(const SparseGrid & grid)
    {
        std::vector<std::array<CornerId, 2>> pairs;
        pairs.reserve(grid.num_voxels() * 12);
        for (VoxelId v = 0; v < grid.num_voxels(); ++v)
        {
            const auto & corners = grid.corners(v);
            for (const auto & e : local_edges())
            {
                const auto a = corners[e.corner_lo];
                const auto b = corners[e.corner_hi];
                pairs.push_back({std::min(a, b), std::max(a, b)});
            }
        }
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
        return pairs;
    }

    void write_grid(std::ostream & out, const SparseGrid & grid)
    {
        out.write(kGridMagic, sizeof(kGridMagic));
        put(out, kGridVersion);
        put(out, grid.resolution());
        for (int d = 0; d < 3; ++d) put(out, grid.domain().min[d]);
        for (int d = 0; d < 3; ++d) put(out, grid.domain().max[d]);
        put(out, static_cast<std::uint64_t>(grid.num_voxels()));
        for (const auto & c : grid.voxels())
        {
            put(out, c.i);
            put(out, c.j);
            put(out, c.k);
        }
        if (!out) throw IoError("failed writing grid");
    }

    SparseGrid read_grid(std::istream & in)
    {
        std::size_t offset = 0;
        char magic[8];
        in.read(magic, sizeof(magic));
        if (in.gcount() != sizeof(magic) || std::memcmp(magic, kGridMagic, sizeof(magic)) != 0)
            throw ParseError("not a sparse grid file (bad magic)", 0);
        offset += sizeof(magic);
        const auto version = get<std::uint32_t>(in, offset, "version");
        if (version != kGridVersion) throw ParseError("unsupported grid version " + std::to_string(version), offset - 4);
        const auto resolution = get<std::uint32_t>(in, offset, "resolution");
        Box domain;
        for (int d = 0; d < 3; ++d) domain.min[d] = get<double>(in, offset, "domain");
        for (int d = 0; d < 3; ++d) domain.max[d] = get<double>(in, offset, "domain");
        const auto count = get<std::uint64_t>(in, offset, "voxel count");
        if (resolution < 1 || resolution > kMaxResolution) throw ParseError("invalid resolution", offset - 8);
        if (count > static_cast<std::uint64_t>(resolution) * resolution * resolution)
            throw ParseError("voxel count exceeds N_r^3", offset - 8);

        std::vector<VoxelCoord> coords(count);
        for (auto & c : coords)
        {
            const std::size_t at = offset;
            c.i = get<std::uint32_t>(in, offset, "voxel");
            c.j = get<std::uint32_t>(in, offset, "voxel");
            c.k = get<std::uint32_t>(in, offset, "voxel");
            if (c.i >= resolution || c.j >= resolution || c.k >= resolution)
                throw ParseError("voxel coordinate out of range", at);
        }
        try
        {
            return build_grid(coords, resolution, domain);
        }
        catch (const std::invalid_argument & e)
        {
            throw ParseError(e.what(), 12);
        }
    }

    void save_grid(const std::string & path, const SparseGrid & grid)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path + " for writing");
        write_grid(out, grid);
    }

    SparseGrid load_grid(const std::string & path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        return read_grid(in);
    }
    std::vector<VoxelId> dilate(const SparseGrid & grid, std::span<const VoxelId> ids, int rings)
    {
        if (rings < 0) throw std::invalid_argument("dilate: rings must be >= 0");
        std::vector<std::uint8_t> flag(grid.num_voxels(), 0);
        for (const VoxelId v : ids)
        {
            if (v >= grid.num_voxels()) throw std::out_of_range("dilate: voxel id out of range");
            flag[v] = 1;
        }
        for (int r = 0; r < rings; ++r)
        {
            std::vector<std::uint8_t> next = flag;
            for (VoxelId v = 0; v < grid.num_voxels(); ++v)
            {
                if (!flag[v]) continue;
                const auto & p = grid.voxel(v);
                for (int dz = -1; dz <= 1; ++dz)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            if (const auto n = grid.find(std::int64_t{p.i} + dx, std::int64_t{p.j} + dy, std::int64_t{p.k} + dz))
                                next[*n] = 1;
            }
            flag.swap(next);
        }
        std::vector<VoxelId> out;
        for (VoxelId v = 0; v < grid.num_voxels(); ++v)
            if (flag[v]) out.push_back(v);
        return out;
    }
}  // namespace sparseflex
