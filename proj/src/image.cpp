#include "hsplat/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

#include "hsplat/asset_io.hpp"
#include "hsplat/error.hpp"

namespace hsplat {

namespace {

std::uint8_t quantize(float v) {
    if (!(v > 0.0f)) {
        return 0;
    }
    return static_cast<std::uint8_t>(std::lround(std::min(v, 1.0f) * 255.0f));
}

struct ReadCursor {
    std::span<const std::byte> bytes;
    std::size_t at = 0;
};

void png_read_span(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->bytes.size() - cur->at < n) {
        png_error(png, "truncated png");
    }
    std::memcpy(out, cur->bytes.data() + cur->at, n);
    cur->at += n;
}

void png_write_vec(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::byte>*>(png_get_io_ptr(png));
    const auto* p = reinterpret_cast<const std::byte*>(data);
    out->insert(out->end(), p, p + n);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    *static_cast<std::string*>(png_get_error_ptr(png)) = msg;
    png_longjmp(png, 1);
}

}  // namespace

Image::Image(int w, int h, const Vec3f& fill) : width(w), height(h) {
    if (w < 0 || h < 0) {
        throw Error(ErrorCode::invalid_input, "image dimensions must be non-negative");
    }
    rgb.resize(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = fill.x();
        rgb[i + 1] = fill.y();
        rgb[i + 2] = fill.z();
    }
}

Rgba8Image to_rgba8(const Image& img) {
    Rgba8Image out{img.width, img.height, {}};
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    out.pixels.resize(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        out.pixels[4 * i] = quantize(img.rgb[3 * i]);
        out.pixels[4 * i + 1] = quantize(img.rgb[3 * i + 1]);
        out.pixels[4 * i + 2] = quantize(img.rgb[3 * i + 2]);
        out.pixels[4 * i + 3] = 255;
    }
    return out;
}

Image from_rgba8(const Rgba8Image& img) {
    Image out(img.width, img.height);
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    if (img.pixels.size() != n * 4) {
        throw Error(ErrorCode::invalid_input, "rgba8 pixel count does not match dimensions");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            out.rgb[3 * i + c] = static_cast<float>(img.pixels[4 * i + c]) / 255.0f;
        }
    }
    return out;
}

std::vector<std::byte> encode_png(const Rgba8Image& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 4) {
        throw Error(ErrorCode::encode, "cannot encode an empty or inconsistent image");
    }
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorCode::encode, "libpng initialization failed");
    }
    std::vector<std::byte> out;
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * 4);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::encode, "png encode failed: " + message);
    }
    png_set_write_fn(png, &out, png_write_vec, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 3);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

Rgba8Image decode_png(std::span<const std::byte> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw Error(ErrorCode::parse, "not a png file");
    }
    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error(ErrorCode::parse, "libpng initialization failed");
    }
    ReadCursor cursor{bytes, 0};
    Rgba8Image out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::parse, "png decode failed: " + message);
    }
    png_set_read_fn(png, &cursor, png_read_span);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_gray_to_rgb(png);
    png_set_add_alpha(png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) {
        rows[static_cast<std::size_t>(y)] = out.pixels.data() + static_cast<std::size_t>(y) * out.width * 4;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
    write_file_bytes(path, encode_png(to_rgba8(img)));
}

void write_raw_rgba(const std::filesystem::path& path, const Image& img) {
    const auto rgba = to_rgba8(img);
    write_file_bytes(path, std::as_bytes(std::span(rgba.pixels)));
}

}  // namespace hsplat
