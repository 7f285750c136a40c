#include "hsplat/generator.hpp"

#include <algorithm>
#include <cmath>

#include "hsplat/error.hpp"

namespace hsplat {

GaussianBatch generate(const GaussianGenerator& gen, const GeneratorInputs& inputs) {
    GeneratorInputs inp = inputs;
    inp.time = std::isfinite(inp.time) ? std::clamp(inp.time, 0.0f, 1.0f) : 0.0f;
    const float n = inp.view_dir.norm();
    if (!(n > 0.0f) || !std::isfinite(n)) {
        throw Error(ErrorCode::invalid_input, "view_dir must be a non-zero finite vector");
    }
    inp.view_dir /= n;
    if (gen.requires_pose() && !inp.pose) {
        throw Error(ErrorCode::missing_input, std::string(gen.kind()) + " generator requires pose parameters");
    }
    GaussianBatch batch = gen.run(inp);
    batch.validate();
    return batch;
}

StaticGenerator::StaticGenerator(const std::vector<GaussianSource>& sources)
    : batch_(GaussianBatch::from_sources(sources)) {
    batch_.validate();
}

StaticGenerator::StaticGenerator(GaussianBatch batch) : batch_(std::move(batch)) { batch_.validate(); }

}  // namespace hsplat
