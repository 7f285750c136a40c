#include <algorithm>
#include <cmath>

#include "hsplat/error.hpp"
#include "hsplat/generators.hpp"

namespace hsplat {

namespace {

// Bilinear sample of one plane at (u along width, v along height) in [0,1].
void sample_plane(const FeaturePlane& plane, float u, float v, float* out) {
    const float gx = u * static_cast<float>(plane.width - 1);
    const float gy = v * static_cast<float>(plane.height - 1);
    const int x0 = std::min(static_cast<int>(gx), std::max(plane.width - 2, 0));
    const int y0 = std::min(static_cast<int>(gy), std::max(plane.height - 2, 0));
    const int x1 = std::min(x0 + 1, plane.width - 1);
    const int y1 = std::min(y0 + 1, plane.height - 1);
    const float fx = gx - static_cast<float>(x0);
    const float fy = gy - static_cast<float>(y0);
    for (int f = 0; f < plane.features; ++f) {
        const float top = plane.at(y0, x0, f) * (1.0f - fx) + plane.at(y0, x1, f) * fx;
        const float bottom = plane.at(y1, x0, f) * (1.0f - fx) + plane.at(y1, x1, f) * fx;
        out[f] = top * (1.0f - fy) + bottom * fy;
    }
}

void check_head(const MlpParams& head, Eigen::Index in, Eigen::Index out, const char* name) {
    head.validate();
    if (head.input_dim() != in || head.output_dim() != out) {
        throw Error(ErrorCode::invalid_input, std::string("hexplane head '") + name + "' maps " +
                                                  std::to_string(head.input_dim()) + " -> " +
                                                  std::to_string(head.output_dim()) + ", expected " +
                                                  std::to_string(in) + " -> " + std::to_string(out));
    }
}

float clamp01(float v) { return std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f; }

}  // namespace

void HexPlaneField::validate() const {
    const int f = planes[0].features;
    if (f <= 0) {
        throw Error(ErrorCode::invalid_input, "hexplane feature width must be positive");
    }
    for (const FeaturePlane& p : planes) {
        if (p.features != f) {
            throw Error(ErrorCode::invalid_input, "hexplane planes must share one feature width");
        }
        if (p.width < 1 || p.height < 1 ||
            p.data.size() != static_cast<std::size_t>(p.width) * p.height * p.features) {
            throw Error(ErrorCode::invalid_input, "hexplane grid size does not match its data");
        }
        for (float v : p.data) {
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::invalid_input, "hexplane grids must be finite");
            }
        }
    }
    check_head(delta_position, 6 * f, 3, "delta_position");
    check_head(delta_rotation, 6 * f, 4, "delta_rotation");
    check_head(delta_scale, 6 * f, 3, "delta_scale");
    if (!((bounds_max - bounds_min).minCoeff() > 0.0f)) {
        throw Error(ErrorCode::invalid_input, "hexplane bounds must have positive extent");
    }
    const int degree = canonical.empty() ? 0 : canonical.front().degree;
    for (const GaussianSource& g : canonical) {
        if (g.degree != degree) {
            throw Error(ErrorCode::invalid_input, "hexplane canonical set mixes SH degrees");
        }
    }
}

Eigen::VectorXf hexplane_sample(const HexPlaneField& field, float x, float y, float z, float t) {
    const int f = field.feature_width();
    x = clamp01(x);
    y = clamp01(y);
    z = clamp01(z);
    t = clamp01(t);
    const std::array<std::array<float, 2>, 6> coords = {{{x, y}, {x, z}, {y, z}, {x, t}, {y, t}, {z, t}}};
    Eigen::VectorXf out(6 * f);
    for (int p = 0; p < 6; ++p) {
        sample_plane(field.planes[static_cast<std::size_t>(p)], coords[static_cast<std::size_t>(p)][0],
                     coords[static_cast<std::size_t>(p)][1], out.data() + p * f);
    }
    return out;
}

GaussianBatch hexplane_generate(const HexPlaneField& field, const GeneratorInputs& inp) {
    const Eigen::Index width = 6 * field.feature_width();
    if (field.delta_position.input_dim() != width || field.delta_rotation.input_dim() != width ||
        field.delta_scale.input_dim() != width) {
        throw Error(ErrorCode::invalid_input, "hexplane decoder input width does not match 6F");
    }

    const int degree = field.canonical.empty() ? 0 : field.canonical.front().degree;
    const std::size_t n = field.canonical.size();
    GaussianBatch batch;
    batch.meta.count = n;
    batch.meta.degree = degree;
    batch.meta.color_mode = ColorMode::sh;
    batch.meta.covariance = CovarianceForm::scale_rotation;
    batch.positions.reserve(n);
    batch.scales.reserve(n);
    batch.rotations.reserve(n);
    batch.opacity.reserve(n);
    batch.color.reserve(n * static_cast<std::size_t>(sh_coeff_count(degree)));

    const Vec3f extent = field.bounds_max - field.bounds_min;
    for (const GaussianSource& g : field.canonical) {
        const Vec3f unit = (g.position - field.bounds_min).cwiseQuotient(extent);
        const Eigen::VectorXf feat = hexplane_sample(field, unit.x(), unit.y(), unit.z(), inp.time);
        const std::span<const float> fs(feat.data(), static_cast<std::size_t>(feat.size()));
        const Eigen::VectorXf dx = mlp_forward(field.delta_position, fs);
        const Eigen::VectorXf dr = mlp_forward(field.delta_rotation, fs);
        const Eigen::VectorXf ds = mlp_forward(field.delta_scale, fs);

        batch.positions.push_back(g.position + Vec3f(dx[0], dx[1], dx[2]));
        if (dr.isZero(0.0f)) {
            batch.rotations.push_back(g.rotation);
        } else {
            Quat q{g.rotation.w + dr[0], g.rotation.x + dr[1], g.rotation.y + dr[2], g.rotation.z + dr[3]};
            const float qn = q.norm();
            batch.rotations.push_back(qn > 1e-12f ? Quat{q.w / qn, q.x / qn, q.y / qn, q.z / qn} : g.rotation);
        }
        batch.scales.push_back(g.scale.cwiseProduct(Vec3f(std::exp(ds[0]), std::exp(ds[1]), std::exp(ds[2]))));
        batch.opacity.push_back(g.opacity);
        batch.color.insert(batch.color.end(), g.sh.begin(), g.sh.end());
    }
    return batch;
}

HexPlaneGenerator::HexPlaneGenerator(HexPlaneField field) : field_(std::move(field)) { field_.validate(); }

}  // namespace hsplat
