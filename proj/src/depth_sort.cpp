#include <array>
#include <bit>
#include <cmath>

#include "hsplat/error.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

std::uint32_t encode_depth_key(float z) {
    if (!std::isfinite(z) || z < 0.0f) {
        throw Error(ErrorCode::invalid_depth, "depth key needs a finite non-negative depth, got " + std::to_string(z));
    }
    if (z == 0.0f) {
        z = 0.0f;  // fold -0
    }
    return std::bit_cast<std::uint32_t>(z) ^ 0x80000000u;
}

std::vector<std::uint32_t> radix_sort(std::span<const std::uint32_t> keys) {
    const std::size_t n = keys.size();
    if (n > 0xFFFFFFFFull) {
        throw Error(ErrorCode::invalid_input, "radix_sort supports at most 2^32 - 1 keys");
    }
    std::vector<std::uint64_t> a(n), b(n);  // key << 32 | index
    std::array<std::array<std::uint32_t, 256>, 4> hist{};
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t k = keys[i];
        a[i] = (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint32_t>(i);
        ++hist[0][k & 0xFFu];
        ++hist[1][(k >> 8) & 0xFFu];
        ++hist[2][(k >> 16) & 0xFFu];
        ++hist[3][k >> 24];
    }
    for (int pass = 0; pass < 4; ++pass) {
        auto& h = hist[static_cast<std::size_t>(pass)];
        const int shift = 32 + 8 * pass;
        // a digit shared by every key leaves the order unchanged
        if (n == 0 || h[(a[0] >> shift) & 0xFFu] == n) {
            continue;
        }
        std::uint32_t sum = 0;
        for (auto& c : h) {
            const std::uint32_t count = c;
            c = sum;
            sum += count;
        }
        for (std::size_t i = 0; i < n; ++i) {
            b[h[(a[i] >> shift) & 0xFFu]++] = a[i];
        }
        a.swap(b);
    }
    std::vector<std::uint32_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) {
        perm[i] = static_cast<std::uint32_t>(a[i]);
    }
    return perm;
}

}  // namespace hsplat
