#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "hsplat/batch.hpp"

namespace hsplat {

struct PoseParams {
    std::vector<Quat> joint_rotations;  // one per rig joint
    Vec3f root_translation = Vec3f::Zero();
    std::vector<float> shape;           // may be empty

    friend bool operator==(const PoseParams&, const PoseParams&) = default;
};

// Lightweight per-frame inputs handed to every generator.
struct GeneratorInputs {
    std::uint64_t frame_index = 0;
    float time = 0.0f;  // clamped to [0,1]
    Vec3f camera_position = Vec3f::Zero();
    Vec3f view_dir = -Vec3f::UnitZ();  // camera forward, unit length
    std::optional<PoseParams> pose;

    friend bool operator==(const GeneratorInputs&, const GeneratorInputs&) = default;
};

// A per-frame source of Gaussians. Implementations are immutable after
// construction (weights, canonical sets and any derived state are built
// once), so one instance can serve concurrent frames.
class GaussianGenerator {
public:
    virtual ~GaussianGenerator() = default;

    virtual std::string_view kind() const = 0;
    virtual bool requires_pose() const { return false; }
    virtual std::size_t max_count() const = 0;
    virtual int degree() const = 0;

protected:
    virtual GaussianBatch run(const GeneratorInputs& inputs) const = 0;

    friend GaussianBatch generate(const GaussianGenerator& gen, const GeneratorInputs& inputs);
};

// Sanitizes inputs (time clamp, view_dir normalization), enforces the pose
// requirement and validates the produced batch.
GaussianBatch generate(const GaussianGenerator& gen, const GeneratorInputs& inputs);

// Replays a loaded asset unchanged every frame.
class StaticGenerator final : public GaussianGenerator {
public:
    explicit StaticGenerator(const std::vector<GaussianSource>& sources);
    explicit StaticGenerator(GaussianBatch batch);

    std::string_view kind() const override { return "static"; }
    std::size_t max_count() const override { return batch_.meta.count; }
    int degree() const override { return batch_.meta.degree; }
    const GaussianBatch& batch() const { return batch_; }

protected:
    GaussianBatch run(const GeneratorInputs&) const override { return batch_; }

private:
    GaussianBatch batch_;
};

}  // namespace hsplat
