#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hsplat/fixtures.hpp"
#include "hsplat/scene_io.hpp"
#include "scene_helpers.hpp"
#include "test_util.hpp"

using namespace hsplat;
using namespace hsplat::test;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("hsplat_scene_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    void write(const std::string& name, const std::string& text) const { std::ofstream(path / name) << text; }
};

const char* kQuadObj = "v -3 -3 -1\nv 3 -3 -1\nv 3 3 -1\nv -3 3 -1\nf 1 2 3\nf 1 3 4\n";

}  // namespace

TEST_CASE("scene descriptor loads every source kind") {
    TempDir dir;
    const auto cloud = random_cloud(300, 21);
    const auto ply = write_splat_ply(cloud);
    write_file_bytes(dir.path / "a.ply", ply);
    write_file_bytes(dir.path / "b.vspk", serialize_packed(pack_buffer(cloud)));
    dir.write("m.obj", kQuadObj);
    dir.write("gen.json", R"({"kind": "hexplane", "gaussians": 64, "seed": 3})");
    dir.write("scene.json", R"({
        "models": [
            {"id": 4, "ply": "a.ply", "transform": [1,0,0,0.5, 0,1,0,0, 0,0,1,0, 0,0,0,1]},
            {"id": 1, "vspk": "b.vspk"},
            {"id": 2, "generator": "gen.json"},
            {"id": 3, "generator": {"kind": "avatar", "joints": 5, "gaussians": 32}},
            {"synthetic": {"count": 50, "seed": 2, "half_extent": 0.5}, "precision": "fp16"}
        ],
        "mesh": "m.obj",
        "background": [0.1, 0.2, 0.3],
        "filters": ["gamma:2.2", "box3"]
    })");

    const Scene scene = load_scene(dir.path / "scene.json");
    REQUIRE(scene.models.size() == 5);
    const auto* a = scene.find(4);
    REQUIRE(a);
    CHECK(a->batch->meta.count == 300);
    CHECK(a->transform(0, 3) == 0.5f);
    CHECK(scene.find(1)->packed->count == 300);
    CHECK(scene.find(2)->generator->kind() == "hexplane");
    CHECK(scene.find(3)->requires_pose());
    CHECK(scene.find(5)->packed->count == 50);
    CHECK(scene.mesh->triangles.size() == 2);
    CHECK(scene.background.isApprox(Vec3f(0.1f, 0.2f, 0.3f)));
    CHECK(scene.filters.size() == 2);
    CHECK(scene_joint_count(scene) == 5);

    const auto view = parse_view(json{{"yaw_deg", 30}, {"radius", 5}, {"width", 48}, {"height", 32}}, scene);
    REQUIRE(view.inputs.pose);
    CHECK(view.inputs.pose->joint_rotations.size() == 5);
    const auto frame = render_frame(scene, view.camera, view.inputs);
    CHECK(frame.stats.splats_in == 300 + 300 + 64 + 32 + 50);
    CHECK(frame.image.width == 48);
}

TEST_CASE("loaded ply scene renders like the in-memory scene") {
    TempDir dir;
    const auto cloud = random_cloud(400, 22);
    write_file_bytes(dir.path / "a.ply", write_splat_ply(cloud));
    dir.write("scene.json", R"({"models": [{"ply": "a.ply"}]})");
    const Scene loaded = load_scene(dir.path / "scene.json");

    Scene direct;
    direct.models = {batch_instance(0, parse_splat_ply(write_splat_ply(cloud)))};
    const auto cam = front_camera(64, 64);
    CHECK(render_frame(loaded, cam, {}).image == render_frame(direct, cam, {}).image);
}

TEST_CASE("camera forms") {
    const auto eye = parse_camera(json::parse(R"({"eye": [0, 0, 4], "target": [0, 0, 0], "fovy_deg": 50,
                                                  "width": 256, "height": 256})"));
    const auto ref = front_camera(256, 256, 4.0f);
    CHECK(eye.view.isApprox(ref.view));
    CHECK(eye.proj.isApprox(ref.proj));

    // yaw 0, pitch 0 sits on +z
    const auto orbit = parse_camera(json::parse(R"({"yaw_deg": 0, "pitch_deg": 0, "radius": 4})"));
    CHECK(orbit.view.isApprox(ref.view));
    const auto side = parse_camera(json::parse(R"({"yaw_deg": 90, "radius": 2, "target": [1, 0, 0]})"));
    CHECK(side.position().isApprox(Vec3f(3, 0, 0), 1e-5f));

    CHECK(error_code_of([] { parse_camera(json::parse(R"({"fovy_deg": 40})")); }) == ErrorCode::schema);
    CHECK(error_code_of([] { parse_camera(json::parse(R"({"eye": [0, 0]})")); }) == ErrorCode::schema);
    CHECK(error_code_of([] { parse_camera(json::parse(R"({"eye": [0, 0, "x"]})")); }) == ErrorCode::schema);
    CHECK(error_code_of([] { parse_camera(json::parse(R"({"eye": [0, 0, 4], "width": 0})")); }) ==
          ErrorCode::invalid_input);
    CHECK(error_code_of([] { parse_camera(json::parse(R"({"eye": [0, 0, 4], "near": 5, "far": 1})")); }) ==
          ErrorCode::invalid_input);
}

TEST_CASE("pose and inputs") {
    const auto pose = parse_pose(json::parse(R"({"joint_rotations": [[1,0,0,0], [0.7071068,0,0,0.7071068]],
                                                 "root_translation": [0, 1, 0], "shape": [0.1]})"));
    CHECK(pose.joint_rotations.size() == 2);
    CHECK(pose.joint_rotations[1].z == doctest::Approx(0.7071068));
    CHECK(parse_pose(pose_json(pose)) == pose);
    CHECK(error_code_of([] { parse_pose(json::parse(R"({"joint_rotations": [[0,0,0,0]]})")); }) == ErrorCode::schema);
    CHECK(error_code_of([] { parse_pose(json::parse(R"({"root_translation": [0,0,0]})")); }) == ErrorCode::schema);

    Scene scene;
    scene.models = {batch_instance(0, random_cloud(10, 1))};
    const auto cam = front_camera();
    const auto in = make_inputs(scene, cam, 1.7f, std::nullopt, 9);
    CHECK(in.time == 1.0f);
    CHECK(in.frame_index == 9);
    CHECK(!in.pose);
    CHECK(in.camera_position.isApprox(Vec3f(0, 0, 4)));
    CHECK(in.view_dir.isApprox(Vec3f(0, 0, -1)));
}

TEST_CASE("trajectories") {
    Scene scene;
    scene.models = {batch_instance(0, random_cloud(10, 1))};
    const auto orbit = parse_trajectory(json::parse(R"({"orbit": {"frames": 5, "yaw_start_deg": 0,
        "yaw_end_deg": 90, "radius": 3, "width": 32, "height": 16, "time_start": 0, "time_end": 1}})"), scene);
    REQUIRE(orbit.size() == 5);
    CHECK(orbit[4].camera.position().isApprox(Vec3f(3, 0, 0), 1e-5f));
    CHECK(orbit[2].inputs.time == doctest::Approx(0.5));
    CHECK(orbit[3].inputs.frame_index == 3);
    CHECK(orbit[0].camera.viewport.width == 32);

    const auto list = parse_trajectory(json::parse(R"({"frames": [{"eye": [0,0,3]}, {"eye": [0,1,3], "time": 0.2}]})"),
                                       scene);
    REQUIRE(list.size() == 2);
    CHECK(list[1].inputs.time == doctest::Approx(0.2));

    CHECK(error_code_of([&] { parse_trajectory(json::parse(R"({"frames": []})"), scene); }) == ErrorCode::schema);
    CHECK(error_code_of([&] { parse_trajectory(json::parse(R"({"orbit": {"frames": 0}})"), scene); }) ==
          ErrorCode::schema);
    CHECK(error_code_of([&] { parse_trajectory(json::parse("[1]"), scene); }) == ErrorCode::schema);
}

TEST_CASE("scene errors") {
    TempDir dir;
    auto code = [&](const std::string& text) {
        dir.write("s.json", text);
        return error_code_of([&] { load_scene(dir.path / "s.json"); });
    };
    CHECK(code("{") == ErrorCode::parse);
    CHECK(code("{}") == ErrorCode::schema);
    CHECK(code(R"({"models": []})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"id": 0}]})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"ply": "a.ply", "synthetic": {}}]})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"synthetic": {}, "precision": "fp8"}]})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"id": 1, "synthetic": {}}, {"id": 1, "synthetic": {}}]})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"synthetic": {}, "transform": [1, 2]}]})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"synthetic": {"count": "many"}}]})") == ErrorCode::schema);
    CHECK(code(R"({"models": [{"ply": "missing.ply"}]})") == ErrorCode::io);
    CHECK(code(R"({"models": [{"synthetic": {}}], "filters": ["blur"]})") == ErrorCode::invalid_input);
    CHECK(code(R"({"models": [{"generator": {"kind": "nope"}}]})") == ErrorCode::invalid_input);
    CHECK(error_code_of([&] { load_scene(dir.path / "absent.json"); }) == ErrorCode::io);
}
