#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hsplat/image.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

// 20*log10(255/sqrt(MSE)) over 8-bit RGB (float images are quantized
// first); +inf for identical inputs.
double psnr(const Rgba8Image& a, const Rgba8Image& b);
double psnr(const Image& a, const Image& b);

// Mean SSIM over valid 11x11 windows (Gaussian, sigma 1.5), luminance is
// the RGB mean on the 8-bit scale, k1 = 0.01, k2 = 0.03.
double ssim(const Rgba8Image& a, const Rgba8Image& b);
double ssim(const Image& a, const Image& b);

struct TrajectoryFrame {
    Camera camera;
    GeneratorInputs inputs;
};

struct BenchRow {
    std::uint64_t frame = 0;
    FrameStats stats;
    std::uint64_t inversions = 0;

    friend bool operator==(const BenchRow& a, const BenchRow& b);
};

struct StageSummary {
    double generate_ms = 0, preprocess_ms = 0, sort_ms = 0, draw_ms = 0, total_ms = 0;
    double prep_draw_ms() const { return preprocess_ms + draw_ms; }
};

struct BenchmarkReport {
    std::vector<BenchRow> rows;
    std::string strategy = "global";
    std::uint64_t gaussians = 0;
    int width = 0;
    int height = 0;

    StageSummary mean() const;
    StageSummary median() const;
};

BenchmarkReport run_benchmark(const Scene& scene, const std::vector<TrajectoryFrame>& trajectory,
                              const SortStrategy& strategy, int warmup_frames = 1);

constexpr std::string_view kBenchCsvHeader =
    "frame,generate_ms,preprocess_ms,sort_ms,draw_ms,total_ms,splats_in,splats_visible,inversions";

std::string report_csv(const BenchmarkReport& report);
std::vector<BenchRow> parse_report_csv(std::string_view csv);
std::string report_json(const BenchmarkReport& report);

// A copy of the scene keeping an evenly strided fraction of every model's
// Gaussians (generators are subsampled per frame).
Scene subsample_scene(const Scene& scene, double fraction);

struct ScaleRow {
    double scale = 1.0;
    BenchmarkReport report;
};

// Table-1 shaped sweep: one benchmark per scale over the same trajectory.
std::vector<ScaleRow> run_scale_sweep(const Scene& scene, const std::vector<TrajectoryFrame>& trajectory,
                                      const SortStrategy& strategy, const std::vector<double>& scales);
std::string scale_table_csv(const std::vector<ScaleRow>& rows);
std::string scale_table_json(const std::vector<ScaleRow>& rows);

}  // namespace hsplat
