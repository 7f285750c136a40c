#include "hsplat/splat_math.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "hsplat/error.hpp"

namespace hsplat {

namespace {

// Real SH basis constants of the reference 3DGS renderer.
constexpr float kShC0 = 0.28209479177387814f;
constexpr float kShC1 = 0.4886025119029199f;
constexpr float kShC2[] = {1.0925484305920792f, -1.0925484305920792f, 0.31539156525252005f,
                           -1.0925484305920792f, 0.5462742152960396f};
constexpr float kShC3[] = {-0.5900435899266435f, 2.890611442640554f, -0.4570457994644658f,
                           0.3731763325901154f,  -0.4570457994644658f, 1.445305721320277f,
                           -0.5900435899266435f};

bool all_finite(const Vec3f& v) { return v.allFinite(); }

}  // namespace

Quat Quat::from_axis_angle(const Vec3f& axis, float radians) {
    const Vec3f a = axis.normalized();
    const float s = std::sin(radians * 0.5f);
    return {std::cos(radians * 0.5f), a.x() * s, a.y() * s, a.z() * s};
}

float Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Mat3f Sym3::matrix() const {
    Mat3f m;
    m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
    return m;
}

Sym3 Sym3::from_matrix(const Mat3f& m) {
    return {m(0, 0), 0.5f * (m(0, 1) + m(1, 0)), 0.5f * (m(0, 2) + m(2, 0)),
            m(1, 1), 0.5f * (m(1, 2) + m(2, 1)), m(2, 2)};
}

Camera Camera::from_pinhole(const Mat4f& view, float fx, float fy, Viewport viewport, float near_plane,
                            float far_plane) {
    Camera cam;
    cam.view = view;
    cam.viewport = viewport;
    cam.near_plane = near_plane;
    cam.far_plane = far_plane;
    cam.fx = fx;
    cam.fy = fy;
    cam.validate();

    const float depth_range = far_plane - near_plane;
    cam.proj = Mat4f::Zero();
    cam.proj(0, 0) = 2.0f * fx / static_cast<float>(viewport.width);
    cam.proj(1, 1) = 2.0f * fy / static_cast<float>(viewport.height);
    cam.proj(2, 2) = -far_plane / depth_range;
    cam.proj(2, 3) = -far_plane * near_plane / depth_range;
    cam.proj(3, 2) = -1.0f;
    return cam;
}

Camera Camera::look_at(const Vec3f& eye, const Vec3f& target, const Vec3f& up, float fovy_radians,
                       Viewport viewport, float near_plane, float far_plane) {
    const Vec3f forward = (target - eye).normalized();
    Vec3f right = forward.cross(up);
    if (right.squaredNorm() < 1e-12f) {
        // looking along up; any perpendicular works
        right = forward.cross(std::abs(forward.x()) < 0.9f ? Vec3f::UnitX() : Vec3f::UnitZ());
    }
    right.normalize();
    const Vec3f true_up = right.cross(forward);

    Mat4f view = Mat4f::Identity();
    view.block<1, 3>(0, 0) = right.transpose();
    view.block<1, 3>(1, 0) = true_up.transpose();
    view.block<1, 3>(2, 0) = -forward.transpose();
    view.block<3, 1>(0, 3) = -view.block<3, 3>(0, 0) * eye;

    if (!(fovy_radians > 0.0f && fovy_radians < 3.14159f)) {
        throw Error(ErrorCode::invalid_input, "fovy must lie in (0, pi)");
    }
    const float fy = 0.5f * static_cast<float>(viewport.height) / std::tan(0.5f * fovy_radians);
    return from_pinhole(view, fy, fy, viewport, near_plane, far_plane);
}

Camera Camera::orbit(float yaw, float pitch, float radius, const Vec3f& target, float fovy_radians,
                     Viewport viewport, float near_plane, float far_plane) {
    const Vec3f dir(std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw));
    return look_at(target + radius * dir, target, Vec3f::UnitY(), fovy_radians, viewport, near_plane,
                   far_plane);
}

Vec3f Camera::position() const {
    const Mat3f rot = view.block<3, 3>(0, 0);
    return -rot.transpose() * view.block<3, 1>(0, 3);
}

Vec3f Camera::forward() const { return -view.block<1, 3>(2, 0).transpose(); }

void Camera::validate() const {
    if (viewport.width <= 0 || viewport.height <= 0) {
        throw Error(ErrorCode::invalid_input, "camera viewport must be positive");
    }
    if (!(near_plane > 0.0f) || !(far_plane > near_plane) || !std::isfinite(far_plane)) {
        throw Error(ErrorCode::invalid_input, "camera needs 0 < near < far");
    }
    if (!(fx > 0.0f) || !(fy > 0.0f) || !view.allFinite()) {
        throw Error(ErrorCode::invalid_input, "camera focal/view must be finite and positive");
    }
}

Mat3f quat_to_rotmat(const Quat& q) {
    const double n = std::sqrt(double(q.w) * q.w + double(q.x) * q.x + double(q.y) * q.y + double(q.z) * q.z);
    if (!(n > 1e-12) || !std::isfinite(n)) {
        throw Error(ErrorCode::invalid_input, "quaternion has zero or non-finite norm");
    }
    const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r.cast<float>();
}

Sym3 covariance3d(const Vec3f& scale, const Mat3f& rotation) {
    if (!all_finite(scale) || !rotation.allFinite()) {
        throw Error(ErrorCode::invalid_input, "covariance inputs must be finite");
    }
    const Eigen::Matrix3d r = rotation.cast<double>();
    const Eigen::Vector3d s2 = scale.cast<double>().cwiseAbs2();
    const Eigen::Matrix3d sigma = r * s2.asDiagonal() * r.transpose();
    return Sym3::from_matrix(sigma.cast<float>());
}

NdcProjection project_to_ndc(const Vec3f& p_world, const Camera& cam, float margin) {
    NdcProjection out;
    const Vec4f p_cam = cam.view * p_world.homogeneous();
    out.cam_z = p_cam.z();
    if (!(out.cam_z < -cam.near_plane)) {
        return out;
    }
    const Vec4f clip = cam.proj * p_cam;
    const float inv_w = 1.0f / clip.w();
    out.ndc_xy = Vec2f(clip.x() * inv_w, clip.y() * inv_w);
    out.ndc_z = clip.z() * inv_w;
    out.visible = std::abs(out.ndc_xy.x()) <= margin && std::abs(out.ndc_xy.y()) <= margin &&
                  out.ndc_z >= 0.0f && out.ndc_z <= 1.0f;
    return out;
}

Sym2 cov2d_project(const Sym3& sigma, const Vec3f& p_cam, const Camera& cam) {
    const float z = p_cam.z();
    if (z == 0.0f || !std::isfinite(z)) {
        throw Error(ErrorCode::degenerate_depth, "camera-space depth is zero");
    }
    Eigen::Matrix<float, 2, 3> jac;
    jac << cam.fx / z, 0.0f, -cam.fx * p_cam.x() / (z * z),
           0.0f, cam.fy / z, -cam.fy * p_cam.y() / (z * z);
    const Eigen::Matrix<float, 2, 3> t = jac * cam.view.block<3, 3>(0, 0);
    const Eigen::Matrix2f s = t * sigma.matrix() * t.transpose();
    return {s(0, 0) + kCovarianceDilation, 0.5f * (s(0, 1) + s(1, 0)), s(1, 1) + kCovarianceDilation};
}

Eigen2 eigen2x2(const Sym2& s) {
    const float det = s.xx * s.yy - s.xy * s.xy;
    if (!(s.xx > 0.0f) || !(s.yy > 0.0f) || !(det > 0.0f) || !std::isfinite(det)) {
        throw Error(ErrorCode::degenerate_covariance, "2x2 covariance is not positive definite");
    }
    const double mean = 0.5 * (double(s.xx) + s.yy);
    const double half_diff = 0.5 * (double(s.xx) - s.yy);
    const double radius = std::sqrt(half_diff * half_diff + double(s.xy) * s.xy);

    Eigen2 out;
    out.lambda1 = static_cast<float>(mean + radius);
    out.lambda2 = static_cast<float>(mean - radius);
    if (!(out.lambda2 > 0.0f)) {
        out.lambda2 = static_cast<float>(det / (mean + radius));
    }

    if (s.xy == 0.0f) {
        out.v1 = s.xx >= s.yy ? Vec2f::UnitX() : Vec2f::UnitY();
    } else {
        // (S - l1 I) v = 0 has two equivalent row solutions; use the better conditioned one
        const double l1 = mean + radius;
        const Eigen::Vector2d a(s.xy, l1 - s.xx);
        const Eigen::Vector2d b(l1 - s.yy, s.xy);
        out.v1 = (a.squaredNorm() >= b.squaredNorm() ? a : b).normalized().cast<float>();
    }
    out.v2 = Vec2f(-out.v1.y(), out.v1.x());
    return out;
}

Vec3f eval_sh(std::span<const Vec3f> sh, int degree, const Vec3f& view_dir) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw Error(ErrorCode::invalid_input, "SH degree must be in 0..3");
    }
    if (sh.size() != static_cast<std::size_t>(sh_coeff_count(degree))) {
        throw Error(ErrorCode::invalid_input, "SH coefficient count does not match degree");
    }
    Vec3f result = kShC0 * sh[0];
    if (degree > 0) {
        const float x = view_dir.x(), y = view_dir.y(), z = view_dir.z();
        result += -kShC1 * y * sh[1] + kShC1 * z * sh[2] - kShC1 * x * sh[3];
        if (degree > 1) {
            const float xx = x * x, yy = y * y, zz = z * z;
            const float xy = x * y, yz = y * z, xz = x * z;
            result += kShC2[0] * xy * sh[4] + kShC2[1] * yz * sh[5] +
                      kShC2[2] * (2.0f * zz - xx - yy) * sh[6] + kShC2[3] * xz * sh[7] +
                      kShC2[4] * (xx - yy) * sh[8];
            if (degree > 2) {
                result += kShC3[0] * y * (3.0f * xx - yy) * sh[9] + kShC3[1] * xy * z * sh[10] +
                          kShC3[2] * y * (4.0f * zz - xx - yy) * sh[11] +
                          kShC3[3] * z * (2.0f * zz - 3.0f * xx - 3.0f * yy) * sh[12] +
                          kShC3[4] * x * (4.0f * zz - xx - yy) * sh[13] +
                          kShC3[5] * z * (xx - yy) * sh[14] + kShC3[6] * x * (xx - 3.0f * yy) * sh[15];
            }
        }
    }
    result.array() += 0.5f;
    return result.cwiseMax(0.0f).cwiseMin(1.0f);
}

Vec3f transform_point(const Mat4f& m, const Vec3f& p) {
    return m.block<3, 3>(0, 0) * p + m.block<3, 1>(0, 3);
}

Sym3 transform_covariance(const Mat3f& linear, const Sym3& sigma) {
    return Sym3::from_matrix(linear * sigma.matrix() * linear.transpose());
}

}  // namespace hsplat
