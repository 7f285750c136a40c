#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hsplat/splat_math.hpp"

namespace hsplat {

// Linear RGB float image, rows stored top to bottom.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;  // width * height * 3

    Image() = default;
    Image(int w, int h, const Vec3f& fill = Vec3f::Zero());

    float* pixel(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const float* pixel(int x, int y) const { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    Vec3f at(int x, int y) const {
        const float* p = pixel(x, y);
        return {p[0], p[1], p[2]};
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// 8-bit RGBA, rows top to bottom, alpha always 255 for rendered frames.
struct Rgba8Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    friend bool operator==(const Rgba8Image&, const Rgba8Image&) = default;
};

// Clamps to [0,1] and rounds to nearest.
Rgba8Image to_rgba8(const Image& img);
Image from_rgba8(const Rgba8Image& img);

std::vector<std::byte> encode_png(const Rgba8Image& img);
Rgba8Image decode_png(std::span<const std::byte> bytes);

void write_png(const std::filesystem::path& path, const Image& img);
void write_raw_rgba(const std::filesystem::path& path, const Image& img);

}  // namespace hsplat
