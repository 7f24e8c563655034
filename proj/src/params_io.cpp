#include <cstring>
#include <fstream>

#include "sparseflex/flexicubes.hpp"

namespace sparseflex
{
    namespace
    {
        constexpr char kParamsMagic[8] = {'S', 'F', 'P', 'A', 'R', 'A', 'M', '\0'};
        constexpr std::uint32_t kParamsVersion = 1;

        template <typename T>
        void put(std::ostream & out, T v)
        {
            out.write(reinterpret_cast<const char *>(&v), sizeof(T));
        }

        template <typename T>
        T get(std::istream & in, std::size_t & offset, const char * what)
        {
            T v;
            in.read(reinterpret_cast<char *>(&v), sizeof(T));
            if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
                throw ParseError(std::string("truncated params file while reading ") + what, offset);
            offset += sizeof(T);
            return v;
        }
    }  // namespace

    void write_params(std::ostream & out, const FlexParams & params)
    {
        out.write(kParamsMagic, sizeof(kParamsMagic));
        put(out, kParamsVersion);
        put(out, static_cast<std::uint64_t>(params.sdf.size()));
        put(out, static_cast<std::uint64_t>(params.alpha.size()));
        for (double s : params.sdf) put(out, s);
        for (const auto & d : params.deform)
            for (int k = 0; k < 3; ++k) put(out, d[k]);
        for (const auto & a : params.alpha)
            for (double x : a) put(out, x);
        for (const auto & b : params.beta)
            for (double x : b) put(out, x);
        if (!out) throw IoError("failed writing params");
    }

    FlexParams read_params(std::istream & in, const SparseGrid & grid)
    {
        std::size_t offset = 0;
        char magic[8];
        in.read(magic, sizeof(magic));
        if (in.gcount() != sizeof(magic) || std::memcmp(magic, kParamsMagic, sizeof(magic)) != 0)
            throw ParseError("not a params file (bad magic)", 0);
        offset += sizeof(magic);
        const auto version = get<std::uint32_t>(in, offset, "version");
        if (version != kParamsVersion) throw ParseError("unsupported params version " + std::to_string(version), offset - 4);
        const auto corners = get<std::uint64_t>(in, offset, "corner count");
        if (corners != grid.num_corners()) throw ParseError("corner count does not match the grid", offset - 8);
        const auto voxels = get<std::uint64_t>(in, offset, "voxel count");
        if (voxels != grid.num_voxels()) throw ParseError("voxel count does not match the grid", offset - 8);

        FlexParams p;
        p.sdf.resize(corners);
        p.deform.resize(corners);
        p.alpha.resize(voxels);
        p.beta.resize(voxels);
        for (auto & s : p.sdf) s = get<double>(in, offset, "sdf");
        for (auto & d : p.deform)
            for (int k = 0; k < 3; ++k) d[k] = get<double>(in, offset, "deform");
        for (auto & a : p.alpha)
            for (auto & x : a) x = get<double>(in, offset, "alpha");
        for (auto & b : p.beta)
            for (auto & x : b) x = get<double>(in, offset, "beta");
        try
        {
            p.validate(grid);
        }
        catch (const std::invalid_argument & e)
        {
            throw ParseError(e.what(), offset);
        }
        return p;
    }

    void save_params(const std::string & path, const FlexParams & params)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open " + path + " for writing");
        write_params(out, params);
    }

    FlexParams load_params(const std::string & path, const SparseGrid & grid)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        return read_params(in, grid);
    }
}  // namespace sparseflex
