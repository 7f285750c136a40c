#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsplat/generators.hpp"

namespace hsplat {

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t element_count() const;
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

using TensorStore = std::map<std::string, Tensor>;

// Flat weight container, all little-endian:
//   "VSWT" | version u32 (1) | tensor count u32
//   per tensor: name length u32 | name bytes | ndim u32 | dims u32[ndim] | f32 data
std::vector<std::byte> serialize_tensors(const TensorStore& store);
TensorStore deserialize_tensors(std::span<const std::byte> bytes);

// Seeded toy parameters for a descriptor (see docs/fixtures.md). The store
// is what build_generator consumes; a "weights" file overlays it.
TensorStore seeded_tensors(const nlohmann::json& descriptor);

std::shared_ptr<const GaussianGenerator> build_generator(const nlohmann::json& descriptor,
                                                         const std::filesystem::path& base_dir = {});
std::shared_ptr<const GaussianGenerator> load_generator(const std::filesystem::path& descriptor_path);

// Direct builders used by build_generator, exposed for tests and bindings.
AnchorMlpGenerator make_anchor_generator(const TensorStore& store, int offsets_per_anchor);
HexPlaneField make_hexplane_field(const TensorStore& store);
AvatarRig make_avatar_rig(const TensorStore& store);

// Identity pose for a rig with the given joint count.
PoseParams rest_pose(std::size_t joints);

}  // namespace hsplat
