#include <algorithm>
#include <cmath>
#include <limits>

#include "hsplat/error.hpp"
#include "hsplat/generators.hpp"

namespace hsplat {

namespace {

void check_head(const MlpParams& head, Eigen::Index in, Eigen::Index out, const char* name) {
    head.validate();
    if (head.input_dim() != in || head.output_dim() != out) {
        throw Error(ErrorCode::invalid_input, std::string("anchor head '") + name + "' maps " +
                                                  std::to_string(head.input_dim()) + " -> " +
                                                  std::to_string(head.output_dim()) + ", expected " +
                                                  std::to_string(in) + " -> " + std::to_string(out));
    }
}

void check_anchors(const AnchorSet& a) {
    if (a.offsets_per_anchor < 1) {
        throw Error(ErrorCode::invalid_input, "offsets_per_anchor must be >= 1");
    }
    if (a.scales.size() != a.size() || static_cast<std::size_t>(a.features.rows()) != a.size()) {
        throw Error(ErrorCode::invalid_input, "anchor arrays disagree on anchor count");
    }
    if (!a.features.allFinite()) {
        throw Error(ErrorCode::invalid_input, "anchor features must be finite");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a.positions[i].allFinite() || !a.scales[i].allFinite()) {
            throw Error(ErrorCode::invalid_input, "anchor positions/scales must be finite");
        }
    }
}

void check_heads(const AnchorSet& anchors, const AnchorHeads& heads) {
    const Eigen::Index in = anchors.features.cols() + 3;
    const Eigen::Index k = anchors.offsets_per_anchor;
    check_head(heads.offsets, in, 3 * k, "offsets");
    check_head(heads.opacity, in, k, "opacity");
    check_head(heads.covariance, in, 7 * k, "covariance");
    check_head(heads.color, in, 3 * k, "color");
}

constexpr float kOpacityCeil = 1.0f - std::numeric_limits<float>::epsilon() / 2.0f;

}  // namespace

GaussianBatch anchor_mlp_generate(const AnchorSet& anchors, const AnchorHeads& heads, const GeneratorInputs& inp,
                                  float alpha_prune) {
    check_anchors(anchors);
    check_heads(anchors, heads);

    const int k = anchors.offsets_per_anchor;
    const Eigen::Index feature_dim = anchors.features.cols();

    GaussianBatch batch;
    batch.meta.degree = 0;
    batch.meta.color_mode = ColorMode::raw_rgb;
    batch.meta.covariance = CovarianceForm::scale_rotation;

    std::vector<float> input(static_cast<std::size_t>(feature_dim) + 3);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        for (Eigen::Index f = 0; f < feature_dim; ++f) {
            input[static_cast<std::size_t>(f)] = anchors.features(static_cast<Eigen::Index>(a), f);
        }
        input[feature_dim + 0] = inp.view_dir.x();
        input[feature_dim + 1] = inp.view_dir.y();
        input[feature_dim + 2] = inp.view_dir.z();

        const Eigen::VectorXf offsets = mlp_forward(heads.offsets, input);
        const Eigen::VectorXf opacity = mlp_forward(heads.opacity, input);
        const Eigen::VectorXf cov = mlp_forward(heads.covariance, input);
        const Eigen::VectorXf color = mlp_forward(heads.color, input);

        const Vec3f& anchor_pos = anchors.positions[a];
        const Vec3f& anchor_scale = anchors.scales[a];
        for (int j = 0; j < k; ++j) {
            const float alpha = std::min(sigmoid(opacity[j]), kOpacityCeil);
            if (!(alpha > alpha_prune)) {
                continue;
            }
            const Vec3f offset(offsets[3 * j], offsets[3 * j + 1], offsets[3 * j + 2]);
            batch.positions.push_back(anchor_pos + offset.cwiseProduct(anchor_scale));
            batch.opacity.push_back(alpha);

            const Eigen::Index c = 7 * j;
            batch.scales.push_back(
                Vec3f(sigmoid(cov[c]), sigmoid(cov[c + 1]), sigmoid(cov[c + 2])).cwiseProduct(anchor_scale));
            Quat q{cov[c + 3], cov[c + 4], cov[c + 5], cov[c + 6]};
            const float qn = q.norm();
            batch.rotations.push_back(qn > 1e-12f ? Quat{q.w / qn, q.x / qn, q.y / qn, q.z / qn} : Quat::identity());

            batch.color.emplace_back(sigmoid(color[3 * j]), sigmoid(color[3 * j + 1]), sigmoid(color[3 * j + 2]));
        }
    }
    batch.meta.count = batch.positions.size();
    return batch;
}

AnchorMlpGenerator::AnchorMlpGenerator(AnchorSet anchors, AnchorHeads heads, float alpha_prune)
    : anchors_(std::move(anchors)), heads_(std::move(heads)), alpha_prune_(alpha_prune) {
    check_anchors(anchors_);
    check_heads(anchors_, heads_);
}

GaussianBatch AnchorMlpGenerator::run(const GeneratorInputs& inp) const {
    return anchor_mlp_generate(anchors_, heads_, inp, alpha_prune_);
}

}  // namespace hsplat
