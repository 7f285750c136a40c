#include "hsplat/mlp.hpp"

#include <cmath>
#include <string>

#include "hsplat/error.hpp"

namespace hsplat {

Activation parse_activation(std::string_view name) {
    if (name == "identity" || name == "linear") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    throw Error(ErrorCode::invalid_input, "unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    }
    return "identity";
}

void MlpParams::validate() const {
    if (layers.empty()) {
        throw Error(ErrorCode::invalid_input, "mlp has no layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& layer = layers[l];
        if (layer.bias.size() != layer.weight.rows()) {
            throw Error(ErrorCode::invalid_input, "mlp layer " + std::to_string(l) + ": bias/weight size mismatch");
        }
        if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
            throw Error(ErrorCode::invalid_input, "mlp layer " + std::to_string(l) + ": input dim does not chain");
        }
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
            throw Error(ErrorCode::invalid_input, "mlp layer " + std::to_string(l) + ": non-finite weights");
        }
    }
}

Eigen::VectorXf mlp_forward(const MlpParams& params, std::span<const float> x) {
    if (params.layers.empty() || static_cast<Eigen::Index>(x.size()) != params.input_dim()) {
        throw Error(ErrorCode::invalid_input, "mlp input has " + std::to_string(x.size()) + " values, expected " +
                                                  std::to_string(params.input_dim()));
    }
    Eigen::VectorXf h = Eigen::Map<const Eigen::VectorXf>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (const DenseLayer& layer : params.layers) {
        if (layer.weight.cols() != h.size()) {
            throw Error(ErrorCode::invalid_input, "mlp dimension mismatch");
        }
        // accumulate in double; activations see the unrounded sum
        Eigen::VectorXd next = layer.weight.cast<double>() * h.cast<double>() + layer.bias.cast<double>();
        switch (layer.activation) {
        case Activation::identity: break;
        case Activation::relu: next = next.cwiseMax(0.0); break;
        case Activation::sigmoid: next = next.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }); break;
        case Activation::tanh: next = next.array().tanh().matrix(); break;
        }
        h = next.cast<float>();
    }
    return h;
}

}  // namespace hsplat
