#include "hsplat/scene_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hsplat/error.hpp"
#include "hsplat/fixtures.hpp"
#include "hsplat/synthetic.hpp"

namespace hsplat {

namespace {

using nlohmann::json;

constexpr float kDeg = std::numbers::pi_v<float> / 180.0f;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

float finite(float v, const char* what) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::schema, std::string(what) + " must be finite");
    }
    return v;
}

Vec3f vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorCode::schema, std::string(what) + " must be an array of 3 numbers");
    }
    return {finite(j[0].get<float>(), what), finite(j[1].get<float>(), what), finite(j[2].get<float>(), what)};
}

Vec3f vec3_or(const json& j, const char* key, const Vec3f& fallback) {
    return j.contains(key) ? vec3(j.at(key), key) : fallback;
}

Mat4f mat4(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 16) {
        throw Error(ErrorCode::schema, std::string(what) + " must be 16 numbers (row-major)");
    }
    Mat4f m;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            m(r, c) = finite(j[static_cast<std::size_t>(r * 4 + c)].get<float>(), what);
        }
    }
    return m;
}

std::vector<GaussianSource> synthetic_from(const json& s) {
    SyntheticOptions opt;
    opt.count = get_or<std::size_t>(s, "count", opt.count);
    opt.seed = get_or<std::uint64_t>(s, "seed", opt.seed);
    opt.center = vec3_or(s, "center", opt.center);
    if (s.contains("half_extent")) {
        opt.half_extent = s.at("half_extent").is_number() ? Vec3f::Constant(s.at("half_extent").get<float>())
                                                          : vec3(s.at("half_extent"), "half_extent");
    }
    opt.scale_min = get_or<float>(s, "scale_min", opt.scale_min);
    opt.scale_max = get_or<float>(s, "scale_max", opt.scale_max);
    opt.opacity_min = get_or<float>(s, "opacity_min", opt.opacity_min);
    opt.opacity_max = get_or<float>(s, "opacity_max", opt.opacity_max);
    opt.degree = get_or<int>(s, "degree", opt.degree);
    opt.vivid = get_or<bool>(s, "vivid", opt.vivid);
    if (opt.degree < 0 || opt.degree > 3) {
        throw Error(ErrorCode::schema, "synthetic degree must be 0..3");
    }
    return synthetic_gaussians(opt);
}

ModelInstance parse_model(const json& m, const std::filesystem::path& base, std::uint32_t default_id) {
    if (!m.is_object()) {
        throw Error(ErrorCode::schema, "model entry must be an object");
    }
    ModelInstance inst;
    inst.model_id = get_or<std::uint32_t>(m, "id", default_id);
    inst.name = get_or<std::string>(m, "name", "model" + std::to_string(inst.model_id));
    if (m.contains("transform")) {
        inst.transform = mat4(m.at("transform"), "transform");
    }
    const std::string precision = get_or<std::string>(m, "precision", "fp32");
    if (precision != "fp32" && precision != "fp16") {
        throw Error(ErrorCode::schema, "precision must be fp32 or fp16");
    }
    inst.precision = precision == "fp16" ? Precision::fp16 : Precision::fp32;

    int sources = 0;
    for (const char* k : {"ply", "vspk", "generator", "synthetic"}) {
        sources += m.contains(k) ? 1 : 0;
    }
    if (sources != 1) {
        throw Error(ErrorCode::schema, "model " + std::to_string(inst.model_id) +
                                           " needs exactly one of ply, vspk, generator, synthetic");
    }

    auto from_sources = [&](const std::vector<GaussianSource>& src) {
        if (inst.precision == Precision::fp16) {
            inst.packed = std::make_shared<const PackedSplatBuffer>(pack_buffer(src));
        } else {
            inst.batch = std::make_shared<const GaussianBatch>(GaussianBatch::from_sources(src));
        }
    };
    if (m.contains("ply")) {
        from_sources(load_splat_ply(base / m.at("ply").get<std::string>()));
    } else if (m.contains("synthetic")) {
        from_sources(synthetic_from(m.at("synthetic")));
    } else if (m.contains("vspk")) {
        inst.packed = std::make_shared<const PackedSplatBuffer>(
            deserialize_packed(read_file_bytes(base / m.at("vspk").get<std::string>())));
        inst.precision = Precision::fp16;
    } else {
        const json& g = m.at("generator");
        inst.generator = g.is_string() ? load_generator(base / g.get<std::string>()) : build_generator(g, base);
    }
    return inst;
}

Camera camera_core(const json& j) {
    const int width = get_or<int>(j, "width", 256);
    const int height = get_or<int>(j, "height", 256);
    const float fovy = finite(get_or<float>(j, "fovy_deg", 50.0f), "fovy_deg") * kDeg;
    const float near_plane = get_or<float>(j, "near", 0.1f);
    const float far_plane = get_or<float>(j, "far", 100.0f);
    const Vec3f target = vec3_or(j, "target", Vec3f::Zero());
    Camera cam;
    if (j.contains("eye")) {
        cam = Camera::look_at(vec3(j.at("eye"), "eye"), target, vec3_or(j, "up", Vec3f::UnitY()), fovy,
                              {width, height}, near_plane, far_plane);
    } else if (j.contains("yaw_deg") || j.contains("radius")) {
        cam = Camera::orbit(finite(get_or<float>(j, "yaw_deg", 0.0f), "yaw_deg") * kDeg,
                            finite(get_or<float>(j, "pitch_deg", 0.0f), "pitch_deg") * kDeg,
                            finite(get_or<float>(j, "radius", 4.0f), "radius"), target, fovy, {width, height},
                            near_plane, far_plane);
    } else {
        throw Error(ErrorCode::schema, "camera needs 'eye' or an orbit ('yaw_deg', 'pitch_deg', 'radius')");
    }
    cam.validate();
    return cam;
}

template <typename Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, e.what());
    }
}

}  // namespace

Scene parse_scene(const json& j, const std::filesystem::path& base_dir) {
    return guarded([&] {
        if (!j.is_object() || !j.contains("models") || !j.at("models").is_array()) {
            throw Error(ErrorCode::schema, "scene needs a 'models' array");
        }
        Scene scene;
        std::uint32_t next_id = 0;
        for (const auto& m : j.at("models")) {
            scene.models.push_back(parse_model(m, base_dir, next_id));
            next_id = std::max(next_id, scene.models.back().model_id + 1);
        }
        if (scene.models.empty()) {
            throw Error(ErrorCode::schema, "scene has no models");
        }
        std::vector<std::uint32_t> ids;
        for (const auto& m : scene.models) {
            ids.push_back(m.model_id);
        }
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            throw Error(ErrorCode::schema, "duplicate model id");
        }
        if (j.contains("mesh")) {
            scene.mesh = load_mesh_obj(base_dir / j.at("mesh").get<std::string>());
        }
        if (j.contains("mesh_transform")) {
            scene.mesh_transform = mat4(j.at("mesh_transform"), "mesh_transform");
        }
        scene.background = vec3_or(j, "background", Vec3f::Zero());
        if (j.contains("filters")) {
            scene.filters = parse_filter_chain(j.at("filters").get<std::vector<std::string>>());
        }
        return scene;
    });
}

json read_json_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return json::parse(reinterpret_cast<const char*>(bytes.data()),
                           reinterpret_cast<const char*>(bytes.data()) + bytes.size());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, path.string() + ": " + e.what());
    }
}

Scene load_scene(const std::filesystem::path& path) { return parse_scene(read_json_file(path), path.parent_path()); }

Camera parse_camera(const json& j) {
    return guarded([&] {
        if (!j.is_object()) {
            throw Error(ErrorCode::schema, "camera must be an object");
        }
        return camera_core(j);
    });
}

PoseParams parse_pose(const json& j) {
    return guarded([&] {
        PoseParams pose;
        if (!j.is_object() || !j.contains("joint_rotations") || !j.at("joint_rotations").is_array()) {
            throw Error(ErrorCode::schema, "pose needs 'joint_rotations'");
        }
        for (const auto& q : j.at("joint_rotations")) {
            if (!q.is_array() || q.size() != 4) {
                throw Error(ErrorCode::schema, "joint rotation must be [w, x, y, z]");
            }
            Quat r{q[0].get<float>(), q[1].get<float>(), q[2].get<float>(), q[3].get<float>()};
            if (!std::isfinite(r.w) || !std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.z) ||
                r.norm() < 1e-6f) {
                throw Error(ErrorCode::schema, "joint rotation must be finite and nonzero");
            }
            pose.joint_rotations.push_back(r);
        }
        pose.root_translation = vec3_or(j, "root_translation", Vec3f::Zero());
        if (j.contains("shape")) {
            pose.shape = j.at("shape").get<std::vector<float>>();
            for (float s : pose.shape) {
                finite(s, "shape");
            }
        }
        return pose;
    });
}

json pose_json(const PoseParams& pose) {
    json rot = json::array();
    for (const auto& q : pose.joint_rotations) {
        rot.push_back({q.w, q.x, q.y, q.z});
    }
    const auto& t = pose.root_translation;
    return {{"joint_rotations", rot}, {"root_translation", {t.x(), t.y(), t.z()}}, {"shape", pose.shape}};
}

std::size_t scene_joint_count(const Scene& scene) {
    for (const auto& m : scene.models) {
        if (const auto* avatar = dynamic_cast<const AvatarGenerator*>(m.generator.get())) {
            return avatar->rig().joint_count();
        }
    }
    return 0;
}

GeneratorInputs make_inputs(const Scene& scene, const Camera& cam, float time, std::optional<PoseParams> pose,
                            std::uint64_t frame) {
    GeneratorInputs in;
    in.frame_index = frame;
    in.time = std::clamp(time, 0.0f, 1.0f);
    in.camera_position = cam.position();
    in.view_dir = cam.forward();
    if (pose) {
        in.pose = std::move(pose);
    } else if (const std::size_t joints = scene_joint_count(scene); joints > 0) {
        in.pose = rest_pose(joints);
    }
    return in;
}

TrajectoryFrame parse_view(const json& j, const Scene& scene, std::uint64_t frame) {
    return guarded([&] {
        TrajectoryFrame f;
        f.camera = parse_camera(j);
        std::optional<PoseParams> pose;
        if (j.contains("pose")) {
            pose = parse_pose(j.at("pose"));
        }
        f.inputs = make_inputs(scene, f.camera, finite(get_or<float>(j, "time", 0.0f), "time"), pose, frame);
        return f;
    });
}

TrajectoryFrame load_view(const std::filesystem::path& path, const Scene& scene) {
    return parse_view(read_json_file(path), scene);
}

std::vector<TrajectoryFrame> parse_trajectory(const json& j, const Scene& scene) {
    return guarded([&] {
        std::vector<TrajectoryFrame> out;
        if (j.is_object() && j.contains("frames") && j.at("frames").is_array()) {
            for (const auto& f : j.at("frames")) {
                out.push_back(parse_view(f, scene, out.size()));
            }
        } else if (j.is_object() && j.contains("orbit")) {
            const json& o = j.at("orbit");
            const int n = get_or<int>(o, "frames", 60);
            if (n <= 0) {
                throw Error(ErrorCode::schema, "orbit frames must be positive");
            }
            const float y0 = get_or<float>(o, "yaw_start_deg", 0.0f);
            const float y1 = get_or<float>(o, "yaw_end_deg", 360.0f);
            const float t0 = get_or<float>(o, "time_start", 0.0f);
            const float t1 = get_or<float>(o, "time_end", 0.0f);
            for (int i = 0; i < n; ++i) {
                const float u = n > 1 ? static_cast<float>(i) / static_cast<float>(n - 1) : 0.0f;
                json frame = o;
                frame.erase("frames");
                frame["yaw_deg"] = y0 + (y1 - y0) * u;
                frame["time"] = t0 + (t1 - t0) * u;
                out.push_back(parse_view(frame, scene, static_cast<std::uint64_t>(i)));
            }
        } else {
            throw Error(ErrorCode::schema, "trajectory needs 'frames' or 'orbit'");
        }
        if (out.empty()) {
            throw Error(ErrorCode::schema, "trajectory is empty");
        }
        return out;
    });
}

std::vector<TrajectoryFrame> load_trajectory(const std::filesystem::path& path, const Scene& scene) {
    return parse_trajectory(read_json_file(path), scene);
}

}  // namespace hsplat
