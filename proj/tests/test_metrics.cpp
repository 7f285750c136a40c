#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "hsplat/metrics.hpp"
#include "scene_helpers.hpp"
#include "test_util.hpp"

using namespace hsplat;
using namespace hsplat::test;

namespace {

Rgba8Image gray(int w, int h, std::uint8_t v) {
    Rgba8Image img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 4, v)};
    for (std::size_t i = 3; i < img.pixels.size(); i += 4) {
        img.pixels[i] = 255;
    }
    return img;
}

Rgba8Image noise(int w, int h, std::uint32_t seed) {
    std::mt19937 rng(seed);
    Rgba8Image img = gray(w, h, 0);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (i % 4 != 3) {
            img.pixels[i] = static_cast<std::uint8_t>(rng() % 256);
        }
    }
    return img;
}

// Direct 2D window sum per output pixel.
double naive_ssim(const Rgba8Image& a, const Rgba8Image& b) {
    double g[11];
    double gs = 0;
    for (int i = 0; i < 11; ++i) {
        g[i] = std::exp(-(i - 5) * (i - 5) / 4.5);
        gs += g[i];
    }
    auto lum = [](const Rgba8Image& img, int x, int y) {
        const std::size_t o = 4 * (static_cast<std::size_t>(y) * img.width + x);
        return (img.pixels[o] + img.pixels[o + 1] + img.pixels[o + 2]) / 3.0;
    };
    const double c1 = 6.5025, c2 = 58.5225;
    double total = 0;
    int n = 0;
    for (int y = 0; y + 11 <= a.height; ++y) {
        for (int x = 0; x + 11 <= a.width; ++x) {
            double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
            for (int j = 0; j < 11; ++j) {
                for (int i = 0; i < 11; ++i) {
                    const double w = g[i] * g[j] / (gs * gs);
                    const double va = lum(a, x + i, y + j), vb = lum(b, x + i, y + j);
                    ma += w * va;
                    mb += w * vb;
                    aa += w * va * va;
                    bb += w * vb * vb;
                    ab += w * va * vb;
                }
            }
            const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
            total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
            ++n;
        }
    }
    return total / n;
}

std::vector<TrajectoryFrame> orbit(int frames, int w, int h) {
    std::vector<TrajectoryFrame> t;
    for (int f = 0; f < frames; ++f) {
        const float yaw = 1.5f * static_cast<float>(f) / static_cast<float>(frames);
        TrajectoryFrame fr{Camera::orbit(yaw, 0.2f, 5.0f, Vec3f::Zero(), 0.9f, {w, h}, 0.1f, 100.0f), {}};
        fr.inputs.camera_position = fr.camera.position();
        t.push_back(fr);
    }
    return t;
}

}  // namespace

TEST_CASE("psnr") {
    const auto a = noise(32, 24, 1);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());

    auto b = a;
    for (std::size_t i = 0; i < b.pixels.size(); ++i) {
        if (i % 4 != 3) {
            b.pixels[i] = a.pixels[i] == 255 ? 254 : a.pixels[i] + 1;
        }
    }
    CHECK(psnr(a, b) == doctest::Approx(48.1308036).epsilon(1e-8));
    CHECK(psnr(gray(8, 8, 128), gray(8, 8, 0)) == doctest::Approx(5.98660422).epsilon(1e-8));
    CHECK(psnr(a, noise(32, 24, 2)) == psnr(noise(32, 24, 2), a));

    // alpha is ignored
    auto c = a;
    c.pixels[3] = 0;
    CHECK(std::isinf(psnr(a, c)));

    CHECK(error_code_of([&] { psnr(a, gray(8, 8, 0)); }) == ErrorCode::invalid_input);

    const Image f(4, 4, Vec3f::Constant(0.5f));
    CHECK(std::isinf(psnr(f, f)));
}

TEST_CASE("ssim") {
    const auto a = noise(40, 30, 3);
    CHECK(ssim(a, a) == 1.0);

    auto inv = a;
    for (std::size_t i = 0; i < inv.pixels.size(); ++i) {
        if (i % 4 != 3) {
            inv.pixels[i] = static_cast<std::uint8_t>(255 - a.pixels[i]);
        }
    }
    CHECK(ssim(a, inv) < 0.0);

    for (int c : {0, 40, 128, 200}) {
        const double x = c, y = c + 10;
        const double expect = (2 * x * y + 6.5025) / (x * x + y * y + 6.5025);
        CHECK(ssim(gray(16, 16, static_cast<std::uint8_t>(c)), gray(16, 16, static_cast<std::uint8_t>(c + 10))) ==
              doctest::Approx(expect).epsilon(1e-9));
    }

    for (std::uint32_t seed = 10; seed < 14; ++seed) {
        const auto p = noise(24, 19, seed);
        auto q = p;
        std::mt19937 rng(seed);
        for (auto& v : q.pixels) {
            v = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + static_cast<int>(rng() % 61) - 30, 0, 255));
        }
        CHECK(ssim(p, q) == doctest::Approx(naive_ssim(p, q)).epsilon(1e-9));
        CHECK(ssim(p, q) == doctest::Approx(ssim(q, p)).epsilon(1e-12));
    }

    CHECK(error_code_of([&] { ssim(gray(10, 20, 0), gray(10, 20, 0)); }) == ErrorCode::invalid_input);
    CHECK(error_code_of([&] { ssim(gray(20, 20, 0), gray(20, 21, 0)); }) == ErrorCode::invalid_input);
}

TEST_CASE("benchmark report") {
    Scene scene;
    scene.models = {batch_instance(0, random_cloud(3000, 4, 1.0f, 0.01f, 0.05f))};
    const auto traj = orbit(60, 64, 48);
    const auto report = run_benchmark(scene, traj, SortStrategy::parse("lazy:10"));

    REQUIRE(report.rows.size() == 60);
    CHECK(report.gaussians == 3000);
    CHECK(report.width == 64);
    CHECK(report.strategy == "lazy:10");
    std::uint64_t inverted = 0;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& r = report.rows[i];
        CHECK(r.frame == i);
        const auto& s = r.stats;
        CHECK(s.generate_ms + s.preprocess_ms + s.sort_ms + s.draw_ms <= s.total_ms + 0.5);
        CHECK(s.splats_in == 3000);
        CHECK(s.splats_visible <= s.splats_in);
        if (i % 10 == 0) {
            CHECK(r.inversions == 0);
        }
        inverted += r.inversions;
    }
    CHECK(inverted > 0);

    const std::string csv = report_csv(report);
    CHECK(csv.rfind(std::string(kBenchCsvHeader) + "\n", 0) == 0);
    CHECK(parse_report_csv(csv) == report.rows);

    const auto med = report.median();
    CHECK(med.total_ms > 0.0);
    CHECK(report.mean().total_ms > 0.0);

    CHECK(error_code_of([&] { parse_report_csv("frame,x\n1,2\n"); }) == ErrorCode::schema);
    CHECK(error_code_of([&] { parse_report_csv(std::string(kBenchCsvHeader) + "\n1,2,3\n"); }) == ErrorCode::parse);
    CHECK(error_code_of([&] { parse_report_csv(std::string(kBenchCsvHeader) + "\n0,a,1,1,1,1,1,1,0\n"); }) ==
          ErrorCode::parse);
    CHECK(error_code_of([&] { run_benchmark(scene, {}, {}); }) == ErrorCode::invalid_input);
}

TEST_CASE("median and mean") {
    BenchmarkReport r;
    for (double t : {5.0, 1.0, 3.0, 100.0}) {
        BenchRow row;
        row.stats.total_ms = t;
        row.stats.sort_ms = t / 2;
        r.rows.push_back(row);
    }
    CHECK(r.median().total_ms == 4.0);
    CHECK(r.median().sort_ms == 2.0);
    CHECK(r.mean().total_ms == 27.25);
}

TEST_CASE("subsampling and scale sweep") {
    Scene scene;
    scene.models = {batch_instance(0, random_cloud(1000, 5)), packed_instance(1, random_cloud(600, 6))};
    const auto half = subsample_scene(scene, 0.5);
    CHECK(half.models[0].batch->meta.count == 500);
    CHECK(half.models[1].packed->count == 300);
    CHECK(half.models[0].batch->positions[1] == scene.models[0].batch->positions[2]);
    CHECK(subsample_scene(scene, 0.125).max_gaussians() == 125 + 75);
    CHECK(error_code_of([&] { subsample_scene(scene, 0.0); }) == ErrorCode::invalid_input);
    CHECK(error_code_of([&] { subsample_scene(scene, 1.5); }) == ErrorCode::invalid_input);

    const auto traj = orbit(3, 32, 32);
    const auto rows = run_scale_sweep(scene, traj, {}, {1.0, 0.5, 0.25});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].report.gaussians == 1600);
    CHECK(rows[2].report.gaussians == 400);
    const auto table = scale_table_csv(rows);
    CHECK(table.rfind("scale,gaussians,sort_ms,prep_draw_ms,total_ms\n1,1600,", 0) == 0);
    CHECK(scale_table_json(rows).find("\"1/4\"") != std::string::npos);
}
