#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "hsplat/render.hpp"
#include "scene_helpers.hpp"
#include "test_util.hpp"

using namespace hsplat;
using namespace hsplat::test;

namespace {

Splat2D splat_at_pixel(int col, int row, Viewport vp, float depth, Vec4f rgba, float sigma) {
    Splat2D s;
    s.ndc_center = Vec2f((col + 0.5f) / (vp.width * 0.5f) - 1.0f, pixel_center_y(row, vp.height) / (vp.height * 0.5f) - 1.0f);
    s.depth = depth;
    s.axis1 = Vec2f(sigma, 0.0f);
    s.axis2 = Vec2f(0.0f, sigma);
    s.rgba = rgba;
    return s;
}

std::vector<std::uint32_t> back_to_front(std::span<const Splat2D> splats) {
    std::vector<std::uint32_t> keys;
    for (const auto& s : splats) {
        keys.push_back(encode_depth_key(s.depth));
    }
    auto order = radix_sort(keys);
    std::reverse(order.begin(), order.end());
    return order;
}

double ndc_depth_of(double d, double n, double f) { return f * (d - n) / (d * (f - n)); }

}  // namespace

TEST_CASE("encode_depth_key") {
    CHECK(encode_depth_key(0.0f) == 0x80000000u);
    CHECK(encode_depth_key(-0.0f) == 0x80000000u);
    CHECK(encode_depth_key(1.0f) == 0xBF800000u);
    CHECK(error_code_of([] { encode_depth_key(std::numeric_limits<float>::quiet_NaN()); }) == ErrorCode::invalid_depth);
    CHECK(error_code_of([] { encode_depth_key(-0.5f); }) == ErrorCode::invalid_depth);
    CHECK(error_code_of([] { encode_depth_key(std::numeric_limits<float>::infinity()); }) == ErrorCode::invalid_depth);

    std::mt19937 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int i = 0; i < 100000; ++i) {
        float a = u(rng), b = u(rng);
        if (i % 7 == 0) {
            b = a;
        }
        CHECK((a < b) == (encode_depth_key(a) < encode_depth_key(b)));
        CHECK((a == b) == (encode_depth_key(a) == encode_depth_key(b)));
    }
}

TEST_CASE("radix_sort") {
    SUBCASE("sorted and equal inputs give the identity") {
        std::vector<std::uint32_t> sorted(1000);
        std::iota(sorted.begin(), sorted.end(), 5u);
        std::vector<std::uint32_t> ident(1000);
        std::iota(ident.begin(), ident.end(), 0u);
        CHECK(radix_sort(sorted) == ident);
        CHECK(radix_sort(std::vector<std::uint32_t>(1000, 0xDEADBEEF)) == ident);
        CHECK(radix_sort(std::vector<std::uint32_t>{}).empty());
    }
    SUBCASE("matches a stable comparison sort") {
        std::mt19937 rng(17);
        for (std::uint32_t mask : {0xFFFFFFFFu, 0x000000FFu, 0xFF00FF00u, 0x0000000Fu}) {
            std::vector<std::uint32_t> keys(100000);
            for (auto& k : keys) {
                k = static_cast<std::uint32_t>(rng()) & mask;
            }
            std::vector<std::uint32_t> oracle(keys.size());
            std::iota(oracle.begin(), oracle.end(), 0u);
            std::stable_sort(oracle.begin(), oracle.end(),
                             [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
            CHECK(radix_sort(keys) == oracle);
        }
    }
}

TEST_CASE("preprocess") {
    const Camera cam = front_camera(64, 64);
    SplatList out;

    SUBCASE("behind the camera") {
        GaussianSource g = random_cloud(1, 1)[0];
        g.position = Vec3f(0, 0, 10);
        CHECK(preprocess_instance(batch_instance(0, {g}), nullptr, cam, out) == 0);
    }
    SUBCASE("opacity below 1/255 is culled") {
        GaussianSource g = random_cloud(1, 1)[0];
        g.position = Vec3f::Zero();
        g.opacity = 0.001f;
        CHECK(preprocess_instance(batch_instance(0, {g}), nullptr, cam, out) == 0);
        g.opacity = 0.004f;
        CHECK(preprocess_instance(batch_instance(0, {g}), nullptr, cam, out) == 1);
    }
    SUBCASE("splat equals the composition of the kernels") {
        GaussianSource g = random_cloud(1, 9, 1.0f, 0.05f, 0.2f, 2)[0];
        g.position = Vec3f(0.3f, -0.2f, 0.5f);
        REQUIRE(preprocess_instance(batch_instance(7, {g}), nullptr, cam, out) == 1);
        const Splat2D& s = out.splats[0];
        const NdcProjection p = project_to_ndc(g.position, cam);
        const Sym2 s2 = cov2d_project(covariance3d(g.scale, quat_to_rotmat(g.rotation)),
                                      transform_point(cam.view, g.position), cam);
        const Eigen2 e = eigen2x2(s2);
        CHECK(s.ndc_center == p.ndc_xy);
        CHECK(s.depth == p.ndc_z);
        CHECK(s.axis1 == Vec2f(e.v1 * std::sqrt(e.lambda1)));
        CHECK(s.axis2 == Vec2f(e.v2 * std::sqrt(e.lambda2)));
        CHECK(std::abs(s.axis1.dot(s.axis2)) <= 1e-4f * s.axis1.norm() * s.axis2.norm());
        const Vec3f rgb = eval_sh(g.sh, 2, (g.position - cam.position()).normalized());
        CHECK(s.rgba.head<3>() == rgb);
        CHECK(s.rgba.w() == g.opacity);
        CHECK(s.model_id == 7);
        CHECK(out.keys[0] == encode_depth_key(s.depth));
    }
    SUBCASE("model transform is applied to position and covariance") {
        GaussianSource g = random_cloud(1, 4)[0];
        Mat4f m = Mat4f::Identity();
        m.block<3, 3>(0, 0) = quat_to_rotmat(Quat::from_axis_angle(Vec3f::UnitY(), 0.4f)) * 1.5f;
        m.block<3, 1>(0, 3) = Vec3f(0.2f, 0.1f, -0.3f);
        REQUIRE(preprocess_instance(batch_instance(0, {g}, m), nullptr, cam, out) == 1);
        const Vec3f world = transform_point(m, g.position);
        CHECK(out.splats[0].ndc_center == project_to_ndc(world, cam).ndc_xy);
        const Sym3 cov = transform_covariance(m.block<3, 3>(0, 0), covariance3d(g.scale, quat_to_rotmat(g.rotation)));
        const Eigen2 e = eigen2x2(cov2d_project(cov, transform_point(cam.view, world), cam));
        CHECK(out.splats[0].axis1 == Vec2f(e.v1 * std::sqrt(e.lambda1)));
        Mat4f bad = Mat4f::Identity();
        bad(0, 0) = std::numeric_limits<float>::infinity();
        CHECK(error_code_of([&] { preprocess_instance(batch_instance(0, {g}, bad), nullptr, cam, out); }) ==
              ErrorCode::invalid_input);
    }
    SUBCASE("compaction order is independent of workers") {
        const auto cloud = random_cloud(50000, 5, 1.5f);
        SplatList a, b;
        preprocess_instance(batch_instance(3, cloud), nullptr, cam, a, 1);
        preprocess_instance(batch_instance(3, cloud), nullptr, cam, b, 4);
        REQUIRE(a.size() == b.size());
        CHECK(a.keys == b.keys);
        for (std::size_t i = 1; i < a.size(); ++i) {
            REQUIRE(a.splats[i - 1].gaussian_index < a.splats[i].gaussian_index);
        }
    }
}

TEST_CASE("mesh_depth_prepass") {
    const Camera cam = front_camera(40, 30);
    SUBCASE("no mesh") {
        const auto d = mesh_depth_prepass(nullptr, Mat4f::Identity(), cam);
        CHECK(d.depth == std::vector<float>(40 * 30, 1.0f));
    }
    SUBCASE("screen-filling quad at constant depth") {
        const MeshAsset quad = occluder_quad(100.0f, -1.0f, 0.0f);  // camera at z=4, distance 5
        const auto d = mesh_depth_prepass(&quad, Mat4f::Identity(), cam);
        const double want = ndc_depth_of(5.0, 0.1, 100.0);
        for (float v : d.depth) {
            REQUIRE(std::abs(v - want) <= 1e-6);
        }
    }
    SUBCASE("nearer triangle wins") {
        MeshAsset mesh = occluder_quad(100.0f, -1.0f, 0.0f);
        const MeshAsset near = occluder_quad(100.0f, 0.0f, 0.0f);
        for (const auto& v : near.vertices) {
            mesh.vertices.push_back(v);
        }
        mesh.triangles.push_back({4, 5, 6});
        mesh.triangles.push_back({4, 6, 7});
        std::swap(mesh.triangles[0], mesh.triangles[3]);
        const auto d = mesh_depth_prepass(&mesh, Mat4f::Identity(), cam);
        const double want = ndc_depth_of(4.0, 0.1, 100.0);
        for (float v : d.depth) {
            REQUIRE(std::abs(v - want) <= 1e-6);
        }
    }
    SUBCASE("triangles crossing the near plane are clipped") {
        MeshAsset floor;
        floor.vertices = {{-50, -1, 10}, {50, -1, 10}, {0, -1, -100}};
        floor.triangles = {{0, 1, 2}};
        const auto d = mesh_depth_prepass(&floor, Mat4f::Identity(), cam);
        // bottom rows see the floor, top rows do not
        CHECK(d.at(20, 29) < 1.0f);
        CHECK(d.at(20, 0) == 1.0f);
        for (float v : d.depth) {
            CHECK((v >= 0.0f && v <= 1.0f));
        }
    }
}

TEST_CASE("rasterize_sorted and reference_composite") {
    const Viewport vp{32, 32};
    const DepthBuffer far = DepthBuffer::cleared(32, 32);
    const Vec3f bg(0.0f, 1.0f, 0.0f);

    SUBCASE("single opaque wide splat at a pixel center") {
        const std::vector<Splat2D> s = {splat_at_pixel(10, 10, vp, 0.5f, Vec4f(0.2f, 0.4f, 0.6f, 0.999f), 100.0f)};
        const Image img = rasterize_sorted(s, back_to_front(s), far, bg);
        const Vec3f want = 0.999f * Vec3f(0.2f, 0.4f, 0.6f) + 0.001f * bg;
        CHECK((img.at(10, 10) - want).cwiseAbs().maxCoeff() <= 1e-6f);
    }
    SUBCASE("mesh occludes farther splats") {
        DepthBuffer mesh = DepthBuffer::cleared(32, 32);
        std::fill(mesh.depth.begin(), mesh.depth.end(), 0.5f);
        const std::vector<Splat2D> s = {splat_at_pixel(10, 10, vp, 0.9f, Vec4f(1, 0, 0, 0.9f), 50.0f)};
        CHECK(rasterize_sorted(s, back_to_front(s), mesh, bg) == Image(32, 32, bg));
        CHECK(reference_composite(s, mesh, bg) == Image(32, 32, bg));
    }
    SUBCASE("oracle: zero splats") { CHECK(reference_composite({}, far, bg) == Image(32, 32, bg)); }
    SUBCASE("oracle: one splat weighs alpha at its center") {
        const std::vector<Splat2D> s = {splat_at_pixel(5, 7, vp, 0.3f, Vec4f(1, 1, 1, 0.37f), 2.0f)};
        const Image img = reference_composite(s, far, Vec3f::Zero());
        CHECK(img.at(5, 7) == Vec3f::Constant(0.37f));
    }
    SUBCASE("oracle: red in front of blue") {
        const std::vector<Splat2D> s = {splat_at_pixel(3, 3, vp, 0.6f, Vec4f(0, 0, 1, 0.5f), 2.0f),
                                        splat_at_pixel(3, 3, vp, 0.2f, Vec4f(1, 0, 0, 0.5f), 2.0f)};
        const Vec3f want(0.5f, 0.25f, 0.25f);
        CHECK(reference_composite(s, far, bg).at(3, 3) == want);
        CHECK((rasterize_sorted(s, back_to_front(s), far, bg).at(3, 3) - want).norm() <= 1e-6f);
    }
    SUBCASE("unsorted input is a contract violation") {
        const std::vector<Splat2D> s = {splat_at_pixel(3, 3, vp, 0.6f, Vec4f(0, 0, 1, 0.5f), 2.0f),
                                        splat_at_pixel(3, 3, vp, 0.2f, Vec4f(1, 0, 0, 0.5f), 2.0f)};
        RasterOptions opt;
        opt.verify_order = true;
        const std::vector<std::uint32_t> wrong = {1, 0};
        CHECK(error_code_of([&] { rasterize_sorted(s, wrong, far, bg, opt); }) == ErrorCode::contract_violation);
        opt.verify_order = false;
        CHECK_NOTHROW(rasterize_sorted(s, wrong, far, bg, opt));
    }
    SUBCASE("back-to-front over equals front-to-back for random stacks") {
        std::mt19937 rng(21);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        const Viewport tiny{4, 4};
        const DepthBuffer tiny_far = DepthBuffer::cleared(4, 4);
        for (int trial = 0; trial < 400; ++trial) {
            const int k = 1 + trial % 32;
            std::vector<Splat2D> stack;
            for (int i = 0; i < k; ++i) {
                stack.push_back(splat_at_pixel(1, 2, tiny, u(rng), Vec4f(u(rng), u(rng), u(rng), 0.01f + 0.98f * u(rng)),
                                               0.5f + 3.0f * u(rng)));
            }
            const Vec3f b(u(rng), u(rng), u(rng));
            const Image fast = rasterize_sorted(stack, back_to_front(stack), tiny_far, b);
            const Image ref = reference_composite(stack, tiny_far, b);
            REQUIRE(max_abs_diff(fast, ref) <= 1e-5f);
        }
    }
    SUBCASE("raising mesh depth never lowers a splat's contribution") {
        std::mt19937 rng(4);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        std::vector<Splat2D> s;
        for (int i = 0; i < 40; ++i) {
            s.push_back(splat_at_pixel(static_cast<int>(u(rng) * 32), static_cast<int>(u(rng) * 32), vp, u(rng),
                                       Vec4f(0, 0, 0, 0.2f + 0.7f * u(rng)), 1.0f + 4.0f * u(rng)));
        }
        DepthBuffer near = DepthBuffer::cleared(32, 32);
        for (float& d : near.depth) {
            d = u(rng);
        }
        DepthBuffer farther = near;
        for (float& d : farther.depth) {
            d = std::min(1.0f, d + 0.3f * u(rng));
        }
        const auto order = back_to_front(s);
        for (std::size_t tag = 0; tag < s.size(); tag += 3) {
            auto tagged = s;
            tagged[tag].rgba.head<3>().setOnes();
            const Image a = rasterize_sorted(tagged, order, near, Vec3f::Zero());
            const Image b = rasterize_sorted(tagged, order, farther, Vec3f::Zero());
            for (std::size_t i = 0; i < a.rgb.size(); ++i) {
                REQUIRE(b.rgb[i] >= a.rgb[i] - 1e-7f);
            }
        }
    }
}

TEST_CASE("rasterizer matches the oracle on random scenes") {
    for (int scene_index = 0; scene_index < 6; ++scene_index) {
        Scene scene;
        scene.models.push_back(batch_instance(0, random_cloud(150, 100 + scene_index)));
        if (scene_index % 2 == 1) {
            scene.mesh = occluder_quad(0.8f, 0.1f * scene_index - 0.3f, 0.5f);
        }
        scene.background = Vec3f(0.1f, 0.05f * scene_index, 0.2f);
        const Camera cam = front_camera(96, 80);
        Renderer r;
        const FrameResult frame = r.render(scene, cam, GeneratorInputs{});
        const DepthBuffer depth = mesh_depth_prepass(scene.mesh ? &*scene.mesh : nullptr, Mat4f::Identity(), cam);
        const Image ref = reference_composite(r.last_splats().splats, depth, scene.background);
        CHECK(max_abs_diff(frame.image, ref) <= 1e-5f);
        CHECK(frame.inversions == 0);
    }
}

TEST_CASE("render_frame") {
    const auto a = random_cloud(120, 1);
    const auto b = random_cloud(120, 2);
    const Camera cam = front_camera(64, 64);

    SUBCASE("deterministic and worker independent") {
        Scene scene;
        scene.models = {batch_instance(0, a), batch_instance(1, b)};
        const auto f1 = render_frame(scene, cam, {});
        const auto f2 = render_frame(scene, cam, {});
        CHECK(f1.image == f2.image);
        Renderer many(SortStrategy{}, RenderOptions{true, false, 4});
        CHECK(many.render(scene, cam, {}).image == f1.image);
    }
    SUBCASE("two instances equal one concatenated instance") {
        Scene two, one;
        two.models = {batch_instance(1, b), batch_instance(0, a)};
        auto ab = a;
        ab.insert(ab.end(), b.begin(), b.end());
        one.models = {batch_instance(0, ab)};
        CHECK(render_frame(two, cam, {}).image == render_frame(one, cam, {}).image);
    }
    SUBCASE("stats") {
        std::mt19937 rng(6);
        std::uniform_real_distribution<float> u(-3.14f, 3.14f);
        for (int i = 0; i < 100; ++i) {
            Scene scene;
            scene.models = {batch_instance(0, random_cloud(40, static_cast<std::uint64_t>(i), 2.0f))};
            const Camera c = Camera::orbit(u(rng), 0.4f * u(rng), 2.5f, Vec3f::Zero(), 1.0f, {32, 32}, 0.1f, 50.0f);
            const FrameStats s = render_frame(scene, c, {}).stats;
            CHECK(s.splats_visible <= s.splats_in);
            CHECK(s.splats_in == 40);
            CHECK(s.generate_ms + s.preprocess_ms + s.sort_ms + s.draw_ms <= s.total_ms + 0.5);
            CHECK(s.generate_ms >= 0.0);
        }
    }
    SUBCASE("fp16 packed source stays close to fp32") {
        Scene s32, s16;
        s32.models = {batch_instance(0, a)};
        s16.models = {packed_instance(0, a)};
        CHECK(max_abs_diff(render_frame(s32, cam, {}).image, render_frame(s16, cam, {}).image) < 2.0f / 255.0f);
    }
    SUBCASE("generator sources and fp16 generator output") {
        Scene scene;
        ModelInstance m;
        m.generator = std::make_shared<StaticGenerator>(a);
        scene.models = {m};
        Scene direct;
        direct.models = {batch_instance(0, a)};
        CHECK(render_frame(scene, cam, {}).image == render_frame(direct, cam, {}).image);
        scene.models[0].precision = Precision::fp16;
        Scene packed;
        packed.models = {packed_instance(0, a)};
        CHECK(render_frame(scene, cam, {}).image == render_frame(packed, cam, {}).image);
    }
    SUBCASE("errors") {
        CHECK(error_code_of([&] { render_frame(Scene{}, cam, {}); }) == ErrorCode::invalid_input);
        Scene dup;
        dup.models = {batch_instance(0, a), batch_instance(0, b)};
        CHECK(error_code_of([&] { render_frame(dup, cam, {}); }) == ErrorCode::invalid_input);
    }
    SUBCASE("stats json") {
        FrameStats s{1, 2, 3, 4, 10, 100, 50};
        const auto j = nlohmann::json::parse(frame_stats_json(s, 7));
        for (const char* key : {"generate_ms", "preprocess_ms", "sort_ms", "draw_ms", "total_ms", "splats_in",
                                "splats_visible", "inversions"}) {
            CHECK(j.contains(key));
        }
        CHECK(j["splats_visible"] == 50);
        CHECK_FALSE(nlohmann::json::parse(frame_stats_json(s)).contains("inversions"));
    }
}

TEST_CASE("postprocess_apply") {
    Image ramp(8, 8);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            float* p = ramp.pixel(x, y);
            p[0] = x / 7.0f;
            p[1] = y / 7.0f;
            p[2] = (x + y) / 14.0f;
        }
    }
    SUBCASE("identity and gamma 1") {
        const std::vector<PostFilter> id = {PostFilter::parse("identity")};
        CHECK(postprocess_apply(ramp, id) == ramp);
        const std::vector<PostFilter> g1 = {PostFilter::parse("gamma:1.0")};
        CHECK(postprocess_apply(ramp, g1) == ramp);
    }
    SUBCASE("gamma") {
        const std::vector<PostFilter> g = {PostFilter::parse("gamma:2.2")};
        const Image out = postprocess_apply(ramp, g);
        CHECK(out.pixel(3, 0)[0] == doctest::Approx(std::pow(3 / 7.0, 1 / 2.2)));
    }
    SUBCASE("box blur matches direct convolution") {
        const std::vector<PostFilter> box = {PostFilter::parse("box3")};
        const Image out = postprocess_apply(ramp, box);
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                for (int c = 0; c < 3; ++c) {
                    float acc = 0.0f;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int sx = std::min(7, std::max(0, x + dx));
                            const int sy = std::min(7, std::max(0, y + dy));
                            acc += (1.0f / 9.0f) * ramp.pixel(sx, sy)[c];
                        }
                    }
                    REQUIRE(out.pixel(x, y)[c] == acc);
                }
            }
        }
    }
    SUBCASE("chains apply in order and tokens round trip") {
        const std::vector<std::string> tokens = {"conv3:0,0,0,0,2,0,0,0,0", "gamma:2"};
        const auto chain = parse_filter_chain(tokens);
        const Image out = postprocess_apply(ramp, chain);
        CHECK(out.pixel(2, 0)[0] == doctest::Approx(std::sqrt(2 * 2 / 7.0f)));
        CHECK(PostFilter::parse(chain[0].token()).kernel == chain[0].kernel);
    }
    SUBCASE("invalid filters") {
        for (const char* bad : {"conv3:", "conv3:1,2,3", "gamma:0", "gamma:-1", "gamma:x", "sharpen", "conv3"}) {
            CHECK(error_code_of([&] { PostFilter::parse(bad); }) == ErrorCode::invalid_input);
        }
    }
}

TEST_CASE("image io") {
    std::mt19937 rng(2);
    Rgba8Image img{13, 7, {}};
    for (int i = 0; i < 13 * 7 * 4; ++i) {
        img.pixels.push_back(static_cast<std::uint8_t>(rng()));
    }
    CHECK(decode_png(encode_png(img)) == img);
    Image f(1, 1, Vec3f(0.5f, -1.0f, 2.0f));
    const auto q = to_rgba8(f);
    CHECK(q.pixels == std::vector<std::uint8_t>{128, 0, 255, 255});
    CHECK(error_code_of([] { decode_png(std::vector<std::byte>(20, std::byte{1})); }) == ErrorCode::parse);
    auto png = encode_png(img);
    png.resize(png.size() / 2);
    CHECK(error_code_of([&] { decode_png(png); }) == ErrorCode::parse);
}
