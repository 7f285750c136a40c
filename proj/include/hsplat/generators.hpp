#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "hsplat/generator.hpp"
#include "hsplat/mlp.hpp"

namespace hsplat {

// Shared between the anchor-MLP prune rule and the rasterizer's opacity cull.
constexpr float kAlphaMin = 1.0f / 255.0f;

// ---------------------------------------------------------------------------
// Anchor-decoded Gaussians

struct AnchorSet {
    std::vector<Vec3f> positions;
    std::vector<Vec3f> scales;
    Eigen::MatrixXf features;  // A x F, one row per anchor
    int offsets_per_anchor = 1;

    std::size_t size() const { return positions.size(); }
};

// Each head maps concat(feature, view_dir) to k candidate attributes:
// offsets k*3, opacity k, covariance k*7 (scale 3 + rotation 4), color k*3.
struct AnchorHeads {
    MlpParams offsets;
    MlpParams opacity;
    MlpParams covariance;
    MlpParams color;
};

// Decodes k candidates per anchor each frame:
//   position = anchor + offset * anchor_scale
//   opacity  = sigmoid(head), candidates with opacity <= alpha_prune dropped
//   scale    = anchor_scale * sigmoid(head), rotation = normalize(head)
//   color    = sigmoid(head) as raw RGB
GaussianBatch anchor_mlp_generate(const AnchorSet& anchors, const AnchorHeads& heads, const GeneratorInputs& inp,
                                  float alpha_prune = kAlphaMin);

class AnchorMlpGenerator final : public GaussianGenerator {
public:
    AnchorMlpGenerator(AnchorSet anchors, AnchorHeads heads, float alpha_prune = kAlphaMin);

    std::string_view kind() const override { return "anchor_mlp"; }
    std::size_t max_count() const override {
        return anchors_.size() * static_cast<std::size_t>(anchors_.offsets_per_anchor);
    }
    int degree() const override { return 0; }
    const AnchorSet& anchors() const { return anchors_; }
    const AnchorHeads& heads() const { return heads_; }
    float alpha_prune() const { return alpha_prune_; }

protected:
    GaussianBatch run(const GeneratorInputs& inp) const override;

private:
    AnchorSet anchors_;
    AnchorHeads heads_;
    float alpha_prune_;
};

// ---------------------------------------------------------------------------
// HexPlane deformation field

struct FeaturePlane {
    int height = 0;
    int width = 0;
    int features = 0;
    std::vector<float> data;  // row-major H x W x F

    float at(int row, int col, int f) const {
        return data[(static_cast<std::size_t>(row) * width + col) * features + f];
    }
};

enum PlaneIndex { kPlaneXY, kPlaneXZ, kPlaneYZ, kPlaneXT, kPlaneYT, kPlaneZT };

struct HexPlaneField {
    std::array<FeaturePlane, 6> planes;  // xy, xz, yz, xt, yt, zt
    std::vector<GaussianSource> canonical;
    MlpParams delta_position;  // 6F -> 3
    MlpParams delta_rotation;  // 6F -> 4
    MlpParams delta_scale;     // 6F -> 3
    Vec3f bounds_min = Vec3f::Constant(-1.0f);
    Vec3f bounds_max = Vec3f::Constant(1.0f);

    int feature_width() const { return planes[0].features; }
    void validate() const;
};

// Bilinear lookup on each plane at its coordinate pair (first coordinate
// along the width), concatenated in xy, xz, yz, xt, yt, zt order. Inputs
// are clamped to [0,1].
Eigen::VectorXf hexplane_sample(const HexPlaneField& field, float x, float y, float z, float t);

// mu' = mu + dx, r' = normalize(r + dr), s' = s * exp(ds).
GaussianBatch hexplane_generate(const HexPlaneField& field, const GeneratorInputs& inp);

class HexPlaneGenerator final : public GaussianGenerator {
public:
    explicit HexPlaneGenerator(HexPlaneField field);

    std::string_view kind() const override { return "hexplane"; }
    std::size_t max_count() const override { return field_.canonical.size(); }
    int degree() const override { return field_.canonical.empty() ? 0 : field_.canonical.front().degree; }
    const HexPlaneField& field() const { return field_; }

protected:
    GaussianBatch run(const GeneratorInputs& inp) const override { return hexplane_generate(field_, inp); }

private:
    HexPlaneField field_;
};

// ---------------------------------------------------------------------------
// Skinned avatar

struct AvatarRig {
    std::vector<GaussianSource> canonical;
    std::vector<int> parent;        // -1 for the root
    std::vector<Mat4f> rest_local;  // joint frame relative to its parent
    Eigen::MatrixXf skin_weights;   // N x K, rows sum to 1

    std::size_t joint_count() const { return parent.size(); }
    // Throws invalid_rig on cycles, multiple roots, bad parent indices or
    // weight rows that are negative or do not sum to 1.
    void validate() const;
};

// Global joint transforms: M_k = M_parent * rest_local_k * rot(pose_k); the
// root is additionally translated by root_translation. Non-empty shape
// coefficients scale joint k's rest offset by (1 + shape[k]).
std::vector<Mat4f> fk_joint_transforms(const AvatarRig& rig, const PoseParams& pose);

// Linear blend of rest-relative joint transforms, T_i = sum_k w_ik M_k.
GaussianBatch lbs_generate(const AvatarRig& rig, const GeneratorInputs& inp);

class AvatarGenerator final : public GaussianGenerator {
public:
    explicit AvatarGenerator(AvatarRig rig);

    std::string_view kind() const override { return "avatar"; }
    bool requires_pose() const override { return true; }
    std::size_t max_count() const override { return rig_.canonical.size(); }
    int degree() const override { return rig_.canonical.empty() ? 0 : rig_.canonical.front().degree; }
    const AvatarRig& rig() const { return rig_; }

protected:
    GaussianBatch run(const GeneratorInputs& inp) const override { return lbs_generate(rig_, inp); }

private:
    AvatarRig rig_;
};

}  // namespace hsplat
