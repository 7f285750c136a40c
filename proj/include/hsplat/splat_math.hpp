#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace hsplat {

using Vec2f = Eigen::Vector2f;
using Vec3f = Eigen::Vector3f;
using Vec4f = Eigen::Vector4f;
using Mat3f = Eigen::Matrix3f;
using Mat4f = Eigen::Matrix4f;

// Quaternion in (w, x, y, z) order, the order splat assets store it in.
struct Quat {
    float w = 1.0f;
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;

    static Quat identity() { return {}; }
    static Quat from_axis_angle(const Vec3f& axis, float radians);

    float norm() const;
    friend bool operator==(const Quat&, const Quat&) = default;
};

// Upper triangle of a symmetric 3x3 matrix.
struct Sym3 {
    float xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;

    Mat3f matrix() const;
    static Sym3 from_matrix(const Mat3f& m);
    std::array<float, 6> entries() const { return {xx, xy, xz, yy, yz, zz}; }
    friend bool operator==(const Sym3&, const Sym3&) = default;
};

struct Sym2 {
    float xx = 0, xy = 0, yy = 0;
    friend bool operator==(const Sym2&, const Sym2&) = default;
};

constexpr int kMaxShDegree = 3;
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// One Gaussian with activations already applied (linear scale, opacity in (0,1)).
struct GaussianSource {
    Vec3f position = Vec3f::Zero();
    Vec3f scale = Vec3f::Ones();
    Quat rotation;
    float opacity = 0.5f;
    std::vector<Vec3f> sh;  // (degree+1)^2 RGB triples, band-major
    int degree = 0;
};

struct Viewport {
    int width = 0;
    int height = 0;
};

// Pinhole camera. Right-handed world, camera looks down -z, column vectors,
// NDC depth in [0, 1] (near -> 0, far -> 1). Principal point at the
// viewport center.
struct Camera {
    Mat4f view = Mat4f::Identity();
    Mat4f proj = Mat4f::Identity();
    Viewport viewport;
    float near_plane = 0.1f;
    float far_plane = 100.0f;
    float fx = 1.0f;
    float fy = 1.0f;

    static Camera from_pinhole(const Mat4f& view, float fx, float fy, Viewport viewport, float near_plane,
                               float far_plane);
    static Camera look_at(const Vec3f& eye, const Vec3f& target, const Vec3f& up, float fovy_radians,
                          Viewport viewport, float near_plane, float far_plane);
    // Orbit parameterization used by the viewer: eye = target + radius * dir(yaw, pitch).
    static Camera orbit(float yaw, float pitch, float radius, const Vec3f& target, float fovy_radians,
                        Viewport viewport, float near_plane, float far_plane);

    Vec3f position() const;
    Vec3f forward() const;
    void validate() const;
};

// Frustum guard for culling, as a multiple of the clip bounds.
constexpr float kFrustumMargin = 1.3f;
// Added to the 2D covariance diagonal (pixel^2).
constexpr float kCovarianceDilation = 0.3f;

struct NdcProjection {
    Vec2f ndc_xy = Vec2f::Zero();
    float ndc_z = 0.0f;
    float cam_z = 0.0f;
    bool visible = false;
};

struct Eigen2 {
    float lambda1 = 0.0f;
    float lambda2 = 0.0f;
    Vec2f v1 = Vec2f::UnitX();
    Vec2f v2 = Vec2f::UnitY();
};

Mat3f quat_to_rotmat(const Quat& q);
Sym3 covariance3d(const Vec3f& scale, const Mat3f& rotation);
NdcProjection project_to_ndc(const Vec3f& p_world, const Camera& cam, float margin = kFrustumMargin);
Sym2 cov2d_project(const Sym3& sigma, const Vec3f& p_cam, const Camera& cam);
Eigen2 eigen2x2(const Sym2& s);
Vec3f eval_sh(std::span<const Vec3f> sh, int degree, const Vec3f& view_dir);

// Affine helpers shared by the pipeline and generators.
Vec3f transform_point(const Mat4f& m, const Vec3f& p);
Sym3 transform_covariance(const Mat3f& linear, const Sym3& sigma);

}  // namespace hsplat
