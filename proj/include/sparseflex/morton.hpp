#pragma once

#include <cstdint>

namespace sparseflex::morton
{
    /// Coordinates are limited to 21 bits per axis.
    inline constexpr std::uint32_t kMaxCoordBits = 21;

    constexpr std::uint64_t spread_bits(std::uint64_t x)
    {
        x &= 0x1fffff;
        x = (x | x << 32) & 0x1f00000000ffffULL;
        x = (x | x << 16) & 0x1f0000ff0000ffULL;
        x = (x | x << 8) & 0x100f00f00f00f00fULL;
        x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
        x = (x | x << 2) & 0x1249249249249249ULL;
        return x;
    }

    constexpr std::uint32_t compact_bits(std::uint64_t x)
    {
        x &= 0x1249249249249249ULL;
        x = (x ^ (x >> 2)) & 0x10c30c30c30c30c3ULL;
        x = (x ^ (x >> 4)) & 0x100f00f00f00f00fULL;
        x = (x ^ (x >> 8)) & 0x1f0000ff0000ffULL;
        x = (x ^ (x >> 16)) & 0x1f00000000ffffULL;
        x = (x ^ (x >> 32)) & 0x1fffffULL;
        return static_cast<std::uint32_t>(x);
    }

    /// x occupies the lowest bit of each triple.
    constexpr std::uint64_t encode(std::uint32_t x, std::uint32_t y, std::uint32_t z)
    {
        return spread_bits(x) | (spread_bits(y) << 1) | (spread_bits(z) << 2);
    }

    constexpr void decode(std::uint64_t code, std::uint32_t & x, std::uint32_t & y, std::uint32_t & z)
    {
        x = compact_bits(code);
        y = compact_bits(code >> 1);
        z = compact_bits(code >> 2);
    }

    static_assert(encode(1, 0, 0) == 1 && encode(0, 1, 0) == 2 && encode(0, 0, 1) == 4);
    static_assert(encode(3, 3, 3) == 63);
}  // namespace sparseflex::morton
