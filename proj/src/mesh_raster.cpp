#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "hsplat/render.hpp"

namespace hsplat {

namespace {

struct ClipVertex {
    Eigen::Vector4d clip;
};

struct ScreenVertex {
    double x, y, z;  // raster space, y down; NDC depth
};

// Sutherland-Hodgman against clip z >= 0 (the near plane for [0,1] depth).
std::vector<Eigen::Vector4d> clip_near(const std::array<Eigen::Vector4d, 3>& tri) {
    std::vector<Eigen::Vector4d> out;
    for (std::size_t i = 0; i < 3; ++i) {
        const Eigen::Vector4d& a = tri[i];
        const Eigen::Vector4d& b = tri[(i + 1) % 3];
        const bool ain = a.z() >= 0.0;
        const bool bin = b.z() >= 0.0;
        if (ain) {
            out.push_back(a);
        }
        if (ain != bin) {
            const double t = a.z() / (a.z() - b.z());
            out.push_back(a + t * (b - a));
        }
    }
    return out;
}

double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// Top-left rule for triangles with positive edge() area in y-down raster
// space: top edges run exactly horizontal to the right, left edges go up.
bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

void raster_triangle(ScreenVertex v0, ScreenVertex v1, ScreenVertex v2, DepthBuffer& buf) {
    double area = edge(v0, v1, v2.x, v2.y);
    if (area == 0.0 || !std::isfinite(area)) {
        return;
    }
    if (area < 0.0) {
        std::swap(v1, v2);
        area = -area;
    }
    const int x_min = std::max(0, static_cast<int>(std::floor(std::min({v0.x, v1.x, v2.x}))));
    const int x_max = std::min(buf.width - 1, static_cast<int>(std::ceil(std::max({v0.x, v1.x, v2.x}))));
    const int y_min = std::max(0, static_cast<int>(std::floor(std::min({v0.y, v1.y, v2.y}))));
    const int y_max = std::min(buf.height - 1, static_cast<int>(std::ceil(std::max({v0.y, v1.y, v2.y}))));
    const bool tl0 = top_left(v1, v2), tl1 = top_left(v2, v0), tl2 = top_left(v0, v1);
    for (int y = y_min; y <= y_max; ++y) {
        const double py = y + 0.5;
        for (int x = x_min; x <= x_max; ++x) {
            const double px = x + 0.5;
            const double w0 = edge(v1, v2, px, py);
            const double w1 = edge(v2, v0, px, py);
            const double w2 = edge(v0, v1, px, py);
            const bool inside = (w0 > 0 || (w0 == 0 && tl0)) && (w1 > 0 || (w1 == 0 && tl1)) &&
                                (w2 > 0 || (w2 == 0 && tl2));
            if (!inside) {
                continue;
            }
            const double z = (w0 * v0.z + w1 * v1.z + w2 * v2.z) / area;
            if (z > 1.0) {
                continue;
            }
            float& d = buf.depth[static_cast<std::size_t>(y) * buf.width + x];
            d = std::min(d, static_cast<float>(std::max(z, 0.0)));
        }
    }
}

}  // namespace

DepthBuffer mesh_depth_prepass(const MeshAsset* mesh, const Mat4f& mesh_transform, const Camera& cam) {
    DepthBuffer buf = DepthBuffer::cleared(cam.viewport.width, cam.viewport.height);
    if (mesh == nullptr || mesh->triangles.empty()) {
        return buf;
    }
    const Eigen::Matrix4d m = (cam.proj.cast<double>() * cam.view.cast<double>()) * mesh_transform.cast<double>();
    std::vector<Eigen::Vector4d> clip(mesh->vertices.size());
    for (std::size_t i = 0; i < clip.size(); ++i) {
        clip[i] = m * mesh->vertices[i].cast<double>().homogeneous();
    }
    const double w = cam.viewport.width;
    const double h = cam.viewport.height;
    auto to_screen = [&](const Eigen::Vector4d& c) {
        const double inv = 1.0 / c.w();
        return ScreenVertex{(c.x() * inv + 1.0) * 0.5 * w, (1.0 - c.y() * inv) * 0.5 * h, c.z() * inv};
    };
    for (const auto& t : mesh->triangles) {
        const auto poly = clip_near({clip[t[0]], clip[t[1]], clip[t[2]]});
        if (poly.size() < 3) {
            continue;
        }
        const ScreenVertex s0 = to_screen(poly[0]);
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
            raster_triangle(s0, to_screen(poly[k]), to_screen(poly[k + 1]), buf);
        }
    }
    return buf;
}

}  // namespace hsplat
