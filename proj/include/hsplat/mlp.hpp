#pragma once

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hsplat {

enum class Activation { identity, relu, sigmoid, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

struct DenseLayer {
    Eigen::MatrixXf weight;  // out x in
    Eigen::VectorXf bias;    // out
    Activation activation = Activation::identity;
};

struct MlpParams {
    std::vector<DenseLayer> layers;

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }
    // Throws invalid_input on broken dimension chains or non-finite weights.
    void validate() const;
};

Eigen::VectorXf mlp_forward(const MlpParams& params, std::span<const float> x);

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace hsplat
