#include "hsplat/synthetic.hpp"

#include <random>

namespace hsplat {

namespace {
constexpr float kShC0 = 0.28209479177387814f;
}

Vec3f rgb_to_sh_dc(const Vec3f& rgb) { return (rgb.array() - 0.5f) / kShC0; }

std::vector<GaussianSource> synthetic_gaussians(const SyntheticOptions& options) {
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
    std::uniform_real_distribution<float> scale(options.scale_min, options.scale_max);
    std::uniform_real_distribution<float> opacity(options.opacity_min, options.opacity_max);
    std::uniform_real_distribution<float> color(0.0f, 1.0f);
    std::normal_distribution<float> normal(0.0f, 1.0f);

    std::vector<GaussianSource> out;
    out.reserve(options.count);
    for (std::size_t i = 0; i < options.count; ++i) {
        GaussianSource g;
        g.position = options.center + Vec3f(unit(rng), unit(rng), unit(rng)).cwiseProduct(options.half_extent);
        g.scale = Vec3f(scale(rng), scale(rng), scale(rng));
        Quat q{normal(rng), normal(rng), normal(rng), normal(rng)};
        const float n = q.norm();
        g.rotation = n > 1e-6f ? Quat{q.w / n, q.x / n, q.y / n, q.z / n} : Quat::identity();
        g.opacity = opacity(rng);
        g.degree = options.degree;

        Vec3f rgb(color(rng), color(rng), color(rng));
        if (options.vivid) {
            // push one channel up and one down for saturated colors
            const int hi = static_cast<int>(rng() % 3);
            const int lo = (hi + 1 + static_cast<int>(rng() % 2)) % 3;
            rgb[hi] = 0.8f + 0.2f * rgb[hi];
            rgb[lo] = 0.2f * rgb[lo];
        }
        g.sh.assign(static_cast<std::size_t>(sh_coeff_count(options.degree)), Vec3f::Zero());
        g.sh[0] = rgb_to_sh_dc(rgb);
        for (std::size_t k = 1; k < g.sh.size(); ++k) {
            g.sh[k] = 0.1f * Vec3f(normal(rng), normal(rng), normal(rng));
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace hsplat
