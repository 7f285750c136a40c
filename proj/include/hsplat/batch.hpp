#pragma once

#include <cstdint>
#include <vector>

#include "hsplat/splat_math.hpp"

namespace hsplat {

enum class Precision : std::uint8_t { fp32, fp16 };

// How per-Gaussian color is stored: SH coefficients (with the +0.5 offset
// applied at evaluation) or plain RGB in [0,1].
enum class ColorMode : std::uint8_t { sh, raw_rgb };

// Which covariance representation a batch carries. Exactly one is filled.
enum class CovarianceForm : std::uint8_t { upper, scale_rotation };

struct BatchMeta {
    std::size_t count = 0;
    Precision precision = Precision::fp32;
    int degree = 0;
    ColorMode color_mode = ColorMode::sh;
    CovarianceForm covariance = CovarianceForm::scale_rotation;

    friend bool operator==(const BatchMeta&, const BatchMeta&) = default;
};

// Per-frame output of a Gaussian generator. Field names follow the tensor
// names of the generator I/O schema: positions, cov_upper | (scales,
// rotations), opacity, color.
struct GaussianBatch {
    std::vector<Vec3f> positions;
    std::vector<Sym3> cov_upper;
    std::vector<Vec3f> scales;
    std::vector<Quat> rotations;
    std::vector<float> opacity;
    // count * coeffs_per_gaussian() RGB triples
    std::vector<Vec3f> color;
    BatchMeta meta;

    std::size_t coeffs_per_gaussian() const {
        return meta.color_mode == ColorMode::raw_rgb ? 1u : static_cast<std::size_t>(sh_coeff_count(meta.degree));
    }

    Sym3 covariance(std::size_t i) const;

    // Throws invalid_input when array lengths disagree with meta.count or
    // when values break the batch invariants.
    void validate() const;

    static GaussianBatch from_sources(const std::vector<GaussianSource>& sources);

    friend bool operator==(const GaussianBatch&, const GaussianBatch&) = default;
};

}  // namespace hsplat
