#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "hsplat/metrics.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

// Scene descriptor:
//   {"models": [{"id": 0, "ply": "a.ply" | "vspk": "a.vspk" | "generator": "g.json" or {...} |
//                "synthetic": {...}, "precision": "fp32"|"fp16", "transform": [16 floats, row-major]}],
//    "mesh": "m.obj", "mesh_transform": [...], "background": [r,g,b], "filters": ["gamma:2.2"]}
// Relative paths resolve against `base_dir`.
Scene parse_scene(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scene load_scene(const std::filesystem::path& path);

// Camera: {"eye", "target", "up", "fovy_deg", "width", "height", "near", "far"} or the orbit form
// {"yaw_deg", "pitch_deg", "radius", "target", ...}. Optional "time" and "pose" feed the
// generator inputs.
Camera parse_camera(const nlohmann::json& j);
PoseParams parse_pose(const nlohmann::json& j);
nlohmann::json pose_json(const PoseParams& pose);

// Joint count of the first pose-driven model, 0 when none.
std::size_t scene_joint_count(const Scene& scene);

// Inputs for one frame: camera position and direction, clamped time, and a
// rest pose when the scene needs one and none is given.
GeneratorInputs make_inputs(const Scene& scene, const Camera& cam, float time = 0.0f,
                            std::optional<PoseParams> pose = std::nullopt, std::uint64_t frame = 0);

TrajectoryFrame parse_view(const nlohmann::json& j, const Scene& scene, std::uint64_t frame = 0);
TrajectoryFrame load_view(const std::filesystem::path& path, const Scene& scene);

// {"frames": [camera, ...]} or {"orbit": {"frames", "yaw_start_deg", "yaw_end_deg", "pitch_deg",
// "radius", "target", "fovy_deg", "width", "height", "time_start", "time_end"}}.
std::vector<TrajectoryFrame> parse_trajectory(const nlohmann::json& j, const Scene& scene);
std::vector<TrajectoryFrame> load_trajectory(const std::filesystem::path& path, const Scene& scene);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace hsplat
