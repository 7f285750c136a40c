#pragma once

#include <cstdint>
#include <vector>

#include "hsplat/splat_math.hpp"

namespace hsplat {

// Deterministic random Gaussian clouds for tests, benchmarks and demos.
struct SyntheticOptions {
    std::size_t count = 1000;
    std::uint64_t seed = 0;
    Vec3f center = Vec3f::Zero();
    Vec3f half_extent = Vec3f::Ones();
    float scale_min = 0.02f;
    float scale_max = 0.08f;
    float opacity_min = 0.3f;
    float opacity_max = 0.95f;
    int degree = 0;
    // Saturated random base colors instead of muted ones.
    bool vivid = true;
};

std::vector<GaussianSource> synthetic_gaussians(const SyntheticOptions& options);

// Base SH coefficient that evaluates to `rgb` at degree 0.
Vec3f rgb_to_sh_dc(const Vec3f& rgb);

}  // namespace hsplat
