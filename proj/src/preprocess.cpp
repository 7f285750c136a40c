#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "hsplat/error.hpp"
#include "hsplat/parallel.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

namespace {

constexpr std::size_t kGrain = 16384;

void check_transform(const Mat4f& m) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::invalid_input, "model transform must be finite");
    }
    if (std::abs(m.block<3, 3>(0, 0).determinant()) < 1e-12f) {
        throw Error(ErrorCode::invalid_input, "model transform must be invertible");
    }
}

// Runs per-chunk projection into chunk-local lists, then concatenates in
// chunk order so the result never depends on scheduling.
template <typename Fetch>
std::size_t run_chunks(std::size_t n, std::uint32_t model_id, SplatList& out, int workers, const Fetch& fetch) {
    std::vector<SplatList> parts(chunk_count(n, kGrain));
    parallel_chunks(
        n, kGrain,
        [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            SplatList& part = parts[chunk];
            part.splats.reserve(end - begin);
            std::vector<Vec3f> color;
            for (std::size_t i = begin; i < end; ++i) {
                if (auto s = fetch(i, color)) {
                    s->model_id = model_id;
                    s->gaussian_index = static_cast<std::uint32_t>(i);
                    part.keys.push_back(encode_depth_key(s->depth));
                    part.splats.push_back(*s);
                }
            }
        },
        workers);
    std::size_t appended = 0;
    for (const auto& p : parts) {
        appended += p.size();
    }
    out.splats.reserve(out.size() + appended);
    out.keys.reserve(out.keys.size() + appended);
    for (auto& p : parts) {
        out.splats.insert(out.splats.end(), p.splats.begin(), p.splats.end());
        out.keys.insert(out.keys.end(), p.keys.begin(), p.keys.end());
    }
    return appended;
}

}  // namespace

std::optional<Splat2D> project_gaussian(const Vec3f& position_world, const Sym3& cov_world, float opacity,
                                        std::span<const Vec3f> color, ColorMode mode, int degree,
                                        const Camera& cam) {
    if (!(opacity >= kAlphaMin)) {
        return std::nullopt;
    }
    const NdcProjection proj = project_to_ndc(position_world, cam);
    if (!proj.visible) {
        return std::nullopt;
    }
    const Vec3f p_cam = transform_point(cam.view, position_world);
    const Sym2 s = cov2d_project(cov_world, p_cam, cam);
    if (!std::isfinite(s.xx) || !std::isfinite(s.xy) || !std::isfinite(s.yy)) {
        return std::nullopt;
    }
    Eigen2 e;
    try {
        e = eigen2x2(s);
    } catch (const Error&) {
        return std::nullopt;
    }

    Splat2D out;
    out.ndc_center = proj.ndc_xy;
    out.depth = proj.ndc_z == 0.0f ? 0.0f : proj.ndc_z;
    out.axis1 = e.v1 * std::sqrt(e.lambda1);
    out.axis2 = e.v2 * std::sqrt(e.lambda2);
    Vec3f rgb;
    if (mode == ColorMode::sh) {
        Vec3f dir = position_world - cam.position();
        const float len = dir.norm();
        dir = len > 0.0f ? Vec3f(dir / len) : cam.forward();
        rgb = eval_sh(color, degree, dir);
    } else {
        rgb = color[0].cwiseMax(0.0f).cwiseMin(1.0f);
    }
    out.rgba = Vec4f(rgb.x(), rgb.y(), rgb.z(), std::min(opacity, 1.0f));
    return out;
}

std::size_t preprocess_instance(const ModelInstance& inst, const GaussianBatch* frame_batch, const Camera& cam,
                                SplatList& out, int workers) {
    if (inst.packed && !frame_batch) {
        return preprocess_packed(*inst.packed, inst.model_id, inst.transform, cam, out, workers);
    }
    const GaussianBatch* batch = frame_batch ? frame_batch : inst.batch.get();
    if (batch == nullptr) {
        throw Error(ErrorCode::invalid_input, "model " + std::to_string(inst.model_id) + " has no source for this frame");
    }
    check_transform(inst.transform);
    const Mat3f linear = inst.transform.block<3, 3>(0, 0);
    const bool identity = inst.transform == Mat4f::Identity();
    const std::size_t cpg = batch->coeffs_per_gaussian();
    return run_chunks(batch->meta.count, inst.model_id, out, workers, [&](std::size_t i, std::vector<Vec3f>&) {
        const Vec3f pos = identity ? batch->positions[i] : transform_point(inst.transform, batch->positions[i]);
        const Sym3 cov = identity ? batch->covariance(i) : transform_covariance(linear, batch->covariance(i));
        return project_gaussian(pos, cov, batch->opacity[i], std::span(batch->color).subspan(i * cpg, cpg),
                                batch->meta.color_mode, batch->meta.degree, cam);
    });
}

std::size_t preprocess_packed(const PackedSplatBuffer& buffer, std::uint32_t model_id, const Mat4f& transform,
                              const Camera& cam, SplatList& out, int workers) {
    check_transform(transform);
    const Mat3f linear = transform.block<3, 3>(0, 0);
    const bool identity = transform == Mat4f::Identity();
    const std::size_t cpg = buffer.coeffs_per_gaussian();
    return run_chunks(buffer.count, model_id, out, workers, [&](std::size_t i, std::vector<Vec3f>& color) {
        const float opacity = buffer.opacity(i);
        if (!(opacity >= kAlphaMin)) {
            return std::optional<Splat2D>{};
        }
        const Vec3f p = buffer.position(i);
        const Vec3f pos = identity ? p : transform_point(transform, p);
        const Sym3 cov = identity ? buffer.covariance(i) : transform_covariance(linear, buffer.covariance(i));
        color.resize(cpg);
        buffer.color_coeffs(i, color);
        return project_gaussian(pos, cov, opacity, color, buffer.color_mode, buffer.degree, cam);
    });
}

}  // namespace hsplat
