#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "hsplat/error.hpp"
#include "hsplat/generators.hpp"

namespace hsplat {

namespace {

using Mat4d = Eigen::Matrix4d;
using Mat3d = Eigen::Matrix3d;

// Joints ordered so every parent precedes its children.
std::vector<std::size_t> topological_order(const AvatarRig& rig) {
    const std::size_t k = rig.joint_count();
    std::vector<std::size_t> order;
    order.reserve(k);
    std::vector<int> state(k, 0);  // 0 unvisited, 1 on stack, 2 done
    for (std::size_t start = 0; start < k; ++start) {
        std::vector<std::size_t> chain;
        std::size_t j = start;
        while (state[j] == 0) {
            state[j] = 1;
            chain.push_back(j);
            if (rig.parent[j] < 0) {
                break;
            }
            j = static_cast<std::size_t>(rig.parent[j]);
            if (state[j] == 1) {
                throw Error(ErrorCode::invalid_rig, "parent cycle through joint " + std::to_string(j));
            }
        }
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            state[*it] = 2;
            order.push_back(*it);
        }
    }
    return order;
}

Mat4d rotation4(const Quat& q) {
    Mat4d m = Mat4d::Identity();
    m.block<3, 3>(0, 0) = quat_to_rotmat(q).cast<double>();
    return m;
}

std::vector<Mat4d> global_transforms(const AvatarRig& rig, const PoseParams* pose) {
    const std::size_t k = rig.joint_count();
    std::vector<Mat4d> global(k, Mat4d::Identity());
    for (std::size_t j : topological_order(rig)) {
        Mat4d local = rig.rest_local[j].cast<double>();
        if (pose != nullptr && j < pose->shape.size()) {
            local.block<3, 1>(0, 3) *= 1.0 + static_cast<double>(pose->shape[j]);
        }
        if (pose != nullptr) {
            local = local * rotation4(pose->joint_rotations[j]);
        }
        if (rig.parent[j] < 0) {
            Mat4d root = Mat4d::Identity();
            if (pose != nullptr) {
                root.block<3, 1>(0, 3) = pose->root_translation.cast<double>();
            }
            global[j] = root * local;
        } else {
            global[j] = global[static_cast<std::size_t>(rig.parent[j])] * local;
        }
    }
    return global;
}

Mat4d rigid_inverse(const Mat4d& m) {
    Mat4d inv = Mat4d::Identity();
    const Mat3d rt = m.block<3, 3>(0, 0).transpose();
    inv.block<3, 3>(0, 0) = rt;
    inv.block<3, 1>(0, 3) = -rt * m.block<3, 1>(0, 3);
    return inv;
}

// Closest rotation to a blended linear part (polar factor).
Mat3d polar_rotation(const Mat3d& a) {
    Eigen::JacobiSVD<Mat3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3d u = svd.matrixU();
    const Mat3d v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) {
        u.col(2) = -u.col(2);
    }
    return u * v.transpose();
}

void check_pose(const AvatarRig& rig, const PoseParams& pose) {
    if (pose.joint_rotations.size() != rig.joint_count()) {
        throw Error(ErrorCode::invalid_input, "pose has " + std::to_string(pose.joint_rotations.size()) +
                                                  " joint rotations, rig has " +
                                                  std::to_string(rig.joint_count()) + " joints");
    }
    if (!pose.root_translation.allFinite()) {
        throw Error(ErrorCode::invalid_input, "root translation must be finite");
    }
}

}  // namespace

void AvatarRig::validate() const {
    const std::size_t k = joint_count();
    if (k == 0) {
        throw Error(ErrorCode::invalid_rig, "rig has no joints");
    }
    if (rest_local.size() != k) {
        throw Error(ErrorCode::invalid_rig, "rest_local count != joint count");
    }
    std::size_t roots = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (parent[j] < 0) {
            ++roots;
        } else if (static_cast<std::size_t>(parent[j]) >= k || static_cast<std::size_t>(parent[j]) == j) {
            throw Error(ErrorCode::invalid_rig, "joint " + std::to_string(j) + " has an invalid parent");
        }
        if (!rest_local[j].allFinite()) {
            throw Error(ErrorCode::invalid_rig, "rest transform of joint " + std::to_string(j) + " is not finite");
        }
    }
    if (roots != 1) {
        throw Error(ErrorCode::invalid_rig, "rig must have exactly one root, found " + std::to_string(roots));
    }
    topological_order(*this);

    if (static_cast<std::size_t>(skin_weights.rows()) != canonical.size() ||
        static_cast<std::size_t>(skin_weights.cols()) != k) {
        throw Error(ErrorCode::invalid_rig, "skin weight matrix must be N x K");
    }
    for (Eigen::Index i = 0; i < skin_weights.rows(); ++i) {
        if ((skin_weights.row(i).array() < 0.0f).any() || !skin_weights.row(i).allFinite() ||
            std::abs(skin_weights.row(i).cast<double>().sum() - 1.0) > 1e-5) {
            throw Error(ErrorCode::invalid_rig, "skin weight row " + std::to_string(i) + " is not stochastic");
        }
    }
}

std::vector<Mat4f> fk_joint_transforms(const AvatarRig& rig, const PoseParams& pose) {
    check_pose(rig, pose);
    const auto global = global_transforms(rig, &pose);
    std::vector<Mat4f> out;
    out.reserve(global.size());
    for (const Mat4d& m : global) {
        out.push_back(m.cast<float>());
    }
    return out;
}

GaussianBatch lbs_generate(const AvatarRig& rig, const GeneratorInputs& inp) {
    if (!inp.pose) {
        throw Error(ErrorCode::missing_input, "avatar generator requires pose parameters");
    }
    check_pose(rig, *inp.pose);

    const auto rest = global_transforms(rig, nullptr);
    const auto posed = global_transforms(rig, &*inp.pose);
    std::vector<Mat4d> relative(rig.joint_count());
    for (std::size_t j = 0; j < relative.size(); ++j) {
        relative[j] = posed[j] * rigid_inverse(rest[j]);
    }

    const int degree = rig.canonical.empty() ? 0 : rig.canonical.front().degree;
    const std::size_t n = rig.canonical.size();
    GaussianBatch batch;
    batch.meta.count = n;
    batch.meta.degree = degree;
    batch.meta.color_mode = ColorMode::sh;
    batch.meta.covariance = CovarianceForm::upper;
    batch.positions.reserve(n);
    batch.cov_upper.reserve(n);
    batch.opacity.reserve(n);

    for (std::size_t i = 0; i < n; ++i) {
        const GaussianSource& g = rig.canonical[i];
        Mat4d blend = Mat4d::Zero();
        for (std::size_t j = 0; j < relative.size(); ++j) {
            const double w = rig.skin_weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (w != 0.0) {
                blend += w * relative[j];
            }
        }
        const Mat3d linear = blend.block<3, 3>(0, 0);
        const Eigen::Vector3d mu = linear * g.position.cast<double>() + blend.block<3, 1>(0, 3);
        batch.positions.push_back(mu.cast<float>());

        const Mat3d r = polar_rotation(linear);
        const Mat3d canonical_cov = covariance3d(g.scale, quat_to_rotmat(g.rotation)).matrix().cast<double>();
        batch.cov_upper.push_back(Sym3::from_matrix((r * canonical_cov * r.transpose()).cast<float>()));
        batch.opacity.push_back(g.opacity);
        batch.color.insert(batch.color.end(), g.sh.begin(), g.sh.end());
    }
    return batch;
}

AvatarGenerator::AvatarGenerator(AvatarRig rig) : rig_(std::move(rig)) { rig_.validate(); }

}  // namespace hsplat
