#include "hsplat/batch.hpp"

#include <cmath>

#include "hsplat/error.hpp"

namespace hsplat {

Sym3 GaussianBatch::covariance(std::size_t i) const {
    if (meta.covariance == CovarianceForm::upper) {
        return cov_upper[i];
    }
    return covariance3d(scales[i], quat_to_rotmat(rotations[i]));
}

void GaussianBatch::validate() const {
    const std::size_t n = meta.count;
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw Error(ErrorCode::invalid_input, std::string("gaussian batch: ") + what);
        }
    };
    require(meta.degree >= 0 && meta.degree <= kMaxShDegree, "degree out of range");
    require(positions.size() == n, "positions length != count");
    require(opacity.size() == n, "opacity length != count");
    require(color.size() == n * coeffs_per_gaussian(), "color length != count * coefficients");
    if (meta.covariance == CovarianceForm::upper) {
        require(cov_upper.size() == n && scales.empty() && rotations.empty(),
                "upper-covariance batch must carry only cov_upper");
    } else {
        require(scales.size() == n && rotations.size() == n && cov_upper.empty(),
                "scale/rotation batch must carry only scales and rotations");
    }
    for (float a : opacity) {
        require(a > 0.0f && a < 1.0f, "opacity outside (0,1)");
    }
}

GaussianBatch GaussianBatch::from_sources(const std::vector<GaussianSource>& sources) {
    GaussianBatch batch;
    const int degree = sources.empty() ? 0 : sources.front().degree;
    batch.meta.count = sources.size();
    batch.meta.degree = degree;
    batch.meta.color_mode = ColorMode::sh;
    batch.meta.covariance = CovarianceForm::scale_rotation;
    batch.positions.reserve(sources.size());
    batch.scales.reserve(sources.size());
    batch.rotations.reserve(sources.size());
    batch.opacity.reserve(sources.size());
    batch.color.reserve(sources.size() * static_cast<std::size_t>(sh_coeff_count(degree)));
    for (const GaussianSource& g : sources) {
        if (g.degree != degree) {
            throw Error(ErrorCode::invalid_input, "all Gaussians in a batch must share one SH degree");
        }
        if (g.sh.size() != static_cast<std::size_t>(sh_coeff_count(degree))) {
            throw Error(ErrorCode::invalid_input, "SH coefficient count does not match degree");
        }
        batch.positions.push_back(g.position);
        batch.scales.push_back(g.scale);
        batch.rotations.push_back(g.rotation);
        batch.opacity.push_back(g.opacity);
        batch.color.insert(batch.color.end(), g.sh.begin(), g.sh.end());
    }
    return batch;
}

}  // namespace hsplat
