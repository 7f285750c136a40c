#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsplat/asset_io.hpp"
#include "hsplat/generators.hpp"
#include "hsplat/image.hpp"
#include "hsplat/sort_lab.hpp"

namespace hsplat {

// ---------------------------------------------------------------------------
// Scene

// A model placed in the scene. Exactly one source is set: a generator
// (evaluated per frame), a fixed batch, or a pre-packed fp16 buffer.
struct ModelInstance {
    std::uint32_t model_id = 0;
    std::string name;
    Mat4f transform = Mat4f::Identity();
    std::shared_ptr<const GaussianGenerator> generator;
    std::shared_ptr<const GaussianBatch> batch;
    std::shared_ptr<const PackedSplatBuffer> packed;
    // fp16 routes generator output through pack_batch every frame.
    Precision precision = Precision::fp32;

    std::size_t max_count() const;
    int degree() const;
    bool requires_pose() const { return generator && generator->requires_pose(); }
};

struct PostFilter {
    enum class Kind { identity, gamma, conv3 };
    Kind kind = Kind::identity;
    float gamma = 1.0f;
    std::array<float, 9> kernel{};

    // Tokens: "identity", "gamma:<g>", "conv3:k0,...,k8", "box3".
    static PostFilter parse(std::string_view token);
    std::string token() const;
};

struct Scene {
    std::vector<ModelInstance> models;  // sorted by model_id before rendering
    std::optional<MeshAsset> mesh;
    Mat4f mesh_transform = Mat4f::Identity();
    Vec3f background = Vec3f::Zero();
    std::vector<PostFilter> filters;

    const ModelInstance* find(std::uint32_t model_id) const;
    ModelInstance* find(std::uint32_t model_id);
    std::size_t max_gaussians() const;
};

// ---------------------------------------------------------------------------
// Splats

struct Splat2D {
    Vec2f ndc_center = Vec2f::Zero();
    float depth = 0.0f;                // NDC z in [0,1]
    Vec2f axis1 = Vec2f::Zero();       // pixels, v1 * sqrt(lambda1)
    Vec2f axis2 = Vec2f::Zero();       // pixels, v2 * sqrt(lambda2)
    Vec4f rgba = Vec4f::Zero();        // straight color + opacity
    std::uint32_t model_id = 0;
    std::uint32_t gaussian_index = 0;

    std::uint64_t origin() const { return (static_cast<std::uint64_t>(model_id) << 32) | gaussian_index; }
};

// Splats in compaction order with their depth keys.
struct SplatList {
    std::vector<Splat2D> splats;
    std::vector<std::uint32_t> keys;

    std::size_t size() const { return splats.size(); }
    void clear() {
        splats.clear();
        keys.clear();
    }
};

// Pixel-space evaluation data shared by the rasterizer and the oracle so
// both make identical cull decisions. Pixel space is y-up with the origin
// at the bottom-left corner; image row r has its centers at y = H - r - 0.5.
struct SplatFootprint {
    Vec2f center;
    Vec2f inv1;  // axis1 / |axis1|^2
    Vec2f inv2;
    Vec3f color;
    float alpha = 0.0f;
    float depth = 0.0f;
};

constexpr float kQuadSigma = 3.0f;

inline SplatFootprint make_footprint(const Splat2D& s, const Viewport& vp) {
    SplatFootprint f;
    f.center = Vec2f((s.ndc_center.x() + 1.0f) * 0.5f * static_cast<float>(vp.width),
                     (s.ndc_center.y() + 1.0f) * 0.5f * static_cast<float>(vp.height));
    f.inv1 = s.axis1 / s.axis1.squaredNorm();
    f.inv2 = s.axis2 / s.axis2.squaredNorm();
    f.color = s.rgba.head<3>();
    f.alpha = s.rgba.w();
    f.depth = s.depth;
    return f;
}

// w = alpha * exp(-d^2 / 2) inside the 3-sigma quad, 0 outside or below 1/255.
inline float footprint_weight(const SplatFootprint& f, float px, float py) {
    const float dx = px - f.center.x();
    const float dy = py - f.center.y();
    const float a1 = dx * f.inv1.x() + dy * f.inv1.y();
    const float a2 = dx * f.inv2.x() + dy * f.inv2.y();
    if (std::abs(a1) > kQuadSigma || std::abs(a2) > kQuadSigma) {
        return 0.0f;
    }
    const float w = f.alpha * std::exp(-0.5f * (a1 * a1 + a2 * a2));
    return w < kAlphaMin ? 0.0f : w;
}

inline float pixel_center_y(int row, int height) { return static_cast<float>(height - row) - 0.5f; }
inline float pixel_center_x(int col) { return static_cast<float>(col) + 0.5f; }

// ---------------------------------------------------------------------------
// Depth keys and sorting

// Sign-flipped IEEE bits of z; -0 maps like +0. NaN, negative or infinite
// depths throw invalid_depth.
std::uint32_t encode_depth_key(float z);

// Stable LSD radix sort, four 8-bit passes. Returns the permutation that
// orders keys ascending.
std::vector<std::uint32_t> radix_sort(std::span<const std::uint32_t> keys);

// ---------------------------------------------------------------------------
// Pipeline stages

struct DepthBuffer {
    int width = 0;
    int height = 0;
    std::vector<float> depth;  // rows top to bottom, 1.0 = far / uncovered

    static DepthBuffer cleared(int w, int h) {
        return {w, h, std::vector<float>(static_cast<std::size_t>(w) * h, 1.0f)};
    }
    float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

// Projects one Gaussian; nullopt when culled (frustum, opacity, degenerate).
std::optional<Splat2D> project_gaussian(const Vec3f& position_world, const Sym3& cov_world, float opacity,
                                        std::span<const Vec3f> color, ColorMode mode, int degree,
                                        const Camera& cam);

// Appends the visible splats of one instance in gaussian_index order.
// `frame_batch` is the instance's batch for this frame (ignored for packed
// sources). Returns the appended count.
std::size_t preprocess_instance(const ModelInstance& inst, const GaussianBatch* frame_batch, const Camera& cam,
                                SplatList& out, int workers = 0);
std::size_t preprocess_packed(const PackedSplatBuffer& buffer, std::uint32_t model_id, const Mat4f& transform,
                              const Camera& cam, SplatList& out, int workers = 0);

DepthBuffer mesh_depth_prepass(const MeshAsset* mesh, const Mat4f& mesh_transform, const Camera& cam);

struct RasterOptions {
#ifdef NDEBUG
    bool verify_order = false;
#else
    bool verify_order = true;
#endif
    int workers = 0;
};

// `draw_order` lists splat indices back to front (depth non-increasing).
Image rasterize_sorted(std::span<const Splat2D> splats, std::span<const std::uint32_t> draw_order,
                       const DepthBuffer& mesh_depth, const Vec3f& background, const RasterOptions& options = {});

// Brute force: every splat at every pixel, exact per-pixel depth order,
// front-to-back accumulation in double.
Image reference_composite(std::span<const Splat2D> splats, const DepthBuffer& mesh_depth, const Vec3f& background);

Image postprocess_apply(const Image& img, std::span<const PostFilter> chain);
std::vector<PostFilter> parse_filter_chain(std::span<const std::string> tokens);

// ---------------------------------------------------------------------------
// Frame driver

struct FrameStats {
    double generate_ms = 0;
    double preprocess_ms = 0;
    double sort_ms = 0;
    double draw_ms = 0;
    double total_ms = 0;
    std::uint64_t splats_in = 0;
    std::uint64_t splats_visible = 0;
};

std::string frame_stats_json(const FrameStats& stats, std::optional<std::uint64_t> inversions = std::nullopt);

struct FrameResult {
    Image image;
    FrameStats stats;
    std::uint64_t inversions = 0;
};

struct RenderOptions {
    // Count inversions of the chosen order (outside the timed stages).
    bool count_inversions = true;
    // Skip post-processing; used when comparing against the oracle.
    bool skip_postprocess = false;
    int workers = 0;
};

// Owns per-session pipeline state: the sort strategy with its lazy history
// and scratch buffers reused across frames.
class Renderer {
public:
    explicit Renderer(SortStrategy strategy = {}, RenderOptions options = {});

    void set_strategy(SortStrategy strategy);
    const SortStrategy& strategy() const { return strategy_; }
    RenderOptions& options() { return options_; }

    FrameResult render(const Scene& scene, const Camera& cam, const GeneratorInputs& inputs);

    // Splats of the most recent frame, compaction order.
    const SplatList& last_splats() const { return splats_; }
    const std::vector<std::uint32_t>& last_order() const { return order_; }

private:
    SortStrategy strategy_;
    RenderOptions options_;
    LazySortState lazy_;
    SplatList splats_;
    std::vector<std::uint32_t> order_;
};

// One-shot render with a fresh renderer.
FrameResult render_frame(const Scene& scene, const Camera& cam, const GeneratorInputs& inputs,
                         const SortStrategy& strategy = {});

}  // namespace hsplat
