#include <algorithm>
#include <cmath>

#include "hsplat/error.hpp"
#include "hsplat/parallel.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

namespace {

struct PixelBox {
    int x0, x1, y0, y1;  // inclusive columns / image rows
};

// Conservative pixel bounds of the 3-sigma quad, one pixel of slack.
PixelBox quad_bounds(const Splat2D& s, const SplatFootprint& f, int width, int height) {
    const float ex = kQuadSigma * (std::abs(s.axis1.x()) + std::abs(s.axis2.x()));
    const float ey = kQuadSigma * (std::abs(s.axis1.y()) + std::abs(s.axis2.y()));
    auto clampi = [](double v, int lo, int hi) {
        return static_cast<int>(std::clamp(v, static_cast<double>(lo), static_cast<double>(hi)));
    };
    PixelBox b;
    b.x0 = clampi(std::floor(f.center.x() - ex - 0.5) - 1, 0, width);
    b.x1 = clampi(std::ceil(f.center.x() + ex - 0.5) + 1, -1, width - 1);
    // rows: center y = H - r - 0.5
    b.y0 = clampi(std::floor(height - 0.5 - (f.center.y() + ey)) - 1, 0, height);
    b.y1 = clampi(std::ceil(height - 0.5 - (f.center.y() - ey)) + 1, -1, height - 1);
    return b;
}

}  // namespace

Image rasterize_sorted(std::span<const Splat2D> splats, std::span<const std::uint32_t> draw_order,
                       const DepthBuffer& mesh_depth, const Vec3f& background, const RasterOptions& options) {
    const int width = mesh_depth.width;
    const int height = mesh_depth.height;
    Image img(width, height, background);
    for (std::size_t i = 0; i < draw_order.size(); ++i) {
        if (draw_order[i] >= splats.size()) {
            throw Error(ErrorCode::invalid_input, "draw order references a missing splat");
        }
        if (options.verify_order && i > 0 && splats[draw_order[i]].depth > splats[draw_order[i - 1]].depth) {
            throw Error(ErrorCode::contract_violation,
                        "splats not sorted back to front at position " + std::to_string(i));
        }
    }
    if (width <= 0 || height <= 0) {
        return img;
    }

    const Viewport vp{width, height};
    std::vector<SplatFootprint> prints(draw_order.size());
    std::vector<PixelBox> boxes(draw_order.size());
    for (std::size_t i = 0; i < draw_order.size(); ++i) {
        const Splat2D& s = splats[draw_order[i]];
        prints[i] = make_footprint(s, vp);
        boxes[i] = quad_bounds(s, prints[i], width, height);
    }

    // Horizontal bands; each pixel sees the same splat sequence whatever the
    // band layout, so the output is independent of worker count.
    const int workers = options.workers > 0 ? options.workers : worker_count();
    const int band = workers <= 1 ? height : std::max(8, (height + 4 * workers - 1) / (4 * workers));
    const auto bands = static_cast<std::size_t>((height + band - 1) / band);
    parallel_chunks(
        bands, 1,
        [&](std::size_t chunk, std::size_t, std::size_t) {
            const int row0 = static_cast<int>(chunk) * band;
            const int row1 = std::min(height, row0 + band) - 1;
            for (std::size_t i = 0; i < prints.size(); ++i) {
                const PixelBox& b = boxes[i];
                const int y0 = std::max(b.y0, row0);
                const int y1 = std::min(b.y1, row1);
                if (y0 > y1 || b.x0 > b.x1) {
                    continue;
                }
                const SplatFootprint& f = prints[i];
                for (int y = y0; y <= y1; ++y) {
                    const float py = pixel_center_y(y, height);
                    const float* mesh_row = mesh_depth.depth.data() + static_cast<std::size_t>(y) * width;
                    float* out = img.pixel(0, y);
                    for (int x = b.x0; x <= b.x1; ++x) {
                        if (f.depth > mesh_row[x]) {
                            continue;
                        }
                        const float w = footprint_weight(f, pixel_center_x(x), py);
                        if (w == 0.0f) {
                            continue;
                        }
                        float* p = out + 3 * x;
                        p[0] = w * f.color.x() + (1.0f - w) * p[0];
                        p[1] = w * f.color.y() + (1.0f - w) * p[1];
                        p[2] = w * f.color.z() + (1.0f - w) * p[2];
                    }
                }
            }
        },
        workers);
    return img;
}

Image reference_composite(std::span<const Splat2D> splats, const DepthBuffer& mesh_depth, const Vec3f& background) {
    const int width = mesh_depth.width;
    const int height = mesh_depth.height;
    Image img(width, height, background);
    const Viewport vp{width, height};
    std::vector<SplatFootprint> prints;
    prints.reserve(splats.size());
    for (const Splat2D& s : splats) {
        prints.push_back(make_footprint(s, vp));
    }
    struct Hit {
        float depth;
        std::size_t index;
        float w;
    };
    std::vector<Hit> hits;
    for (int y = 0; y < height; ++y) {
        const float py = pixel_center_y(y, height);
        for (int x = 0; x < width; ++x) {
            const float px = pixel_center_x(x);
            const float mesh = mesh_depth.at(x, y);
            hits.clear();
            for (std::size_t i = 0; i < prints.size(); ++i) {
                if (prints[i].depth > mesh) {
                    continue;
                }
                const float w = footprint_weight(prints[i], px, py);
                if (w > 0.0f) {
                    hits.push_back({prints[i].depth, i, w});
                }
            }
            std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.depth < b.depth; });
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            double transmittance = 1.0;
            for (const Hit& h : hits) {
                c += transmittance * static_cast<double>(h.w) * prints[h.index].color.cast<double>();
                transmittance *= 1.0 - static_cast<double>(h.w);
            }
            c += transmittance * background.cast<double>();
            float* p = img.pixel(x, y);
            p[0] = static_cast<float>(c.x());
            p[1] = static_cast<float>(c.y());
            p[2] = static_cast<float>(c.z());
        }
    }
    return img;
}

}  // namespace hsplat
