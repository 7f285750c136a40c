#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsplat/batch.hpp"
#include "hsplat/splat_math.hpp"

namespace hsplat {

// ---------------------------------------------------------------------------
// Splat PLY

// Parses a binary-little-endian 3DGS PLY. Stored values are activated on the
// way in: opacity = sigmoid(raw), scale = exp(raw), rotation normalized.
std::vector<GaussianSource> parse_splat_ply(std::span<const std::byte> bytes);
std::vector<GaussianSource> load_splat_ply(const std::filesystem::path& path);

// Writes the inverse of parse_splat_ply (logit / log of activated values).
std::vector<std::byte> write_splat_ply(std::span<const GaussianSource> sources);

// ---------------------------------------------------------------------------
// Mesh OBJ

struct MeshAsset {
    std::vector<Vec3f> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::optional<std::vector<Vec3f>> vertex_colors;
};

MeshAsset parse_mesh_obj(std::span<const std::byte> bytes);
MeshAsset load_mesh_obj(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Packed half-precision buffers

// Word layout per Gaussian:
//   pos_opacity  2 words  (x,y) (z,opacity)
//   cov6         3 words  (xx,xy) (xz,yy) (yz,zz)
//   color        ceil(coeffs*3/2) words, zero-padded to a whole word
// Halfs are packed two per word, first in the low 16 bits.
struct PackedSplatBuffer {
    std::uint32_t count = 0;
    int degree = 0;
    ColorMode color_mode = ColorMode::sh;
    std::vector<std::uint32_t> pos_opacity;
    std::vector<std::uint32_t> cov6;
    std::vector<std::uint32_t> color;

    static constexpr std::size_t kPosWords = 2;
    static constexpr std::size_t kCovWords = 3;

    std::size_t coeffs_per_gaussian() const {
        return color_mode == ColorMode::raw_rgb ? 1u : static_cast<std::size_t>(sh_coeff_count(degree));
    }
    std::size_t color_words() const { return (coeffs_per_gaussian() * 3 + 1) / 2; }

    Vec3f position(std::size_t i) const;
    float opacity(std::size_t i) const;
    Sym3 covariance(std::size_t i) const;
    // Writes coeffs_per_gaussian() triples into out.
    void color_coeffs(std::size_t i, std::span<Vec3f> out) const;

    void validate() const;
    friend bool operator==(const PackedSplatBuffer&, const PackedSplatBuffer&) = default;
};

struct UnpackedSplat {
    Vec3f position;
    float opacity;
    Sym3 covariance;
    std::vector<Vec3f> color;
};

PackedSplatBuffer pack_buffer(std::span<const GaussianSource> sources);
PackedSplatBuffer pack_batch(const GaussianBatch& batch);
std::vector<UnpackedSplat> unpack_buffer(const PackedSplatBuffer& buffer);
// Repacks unpacked values; pack(unpack(pack(x))) is byte-identical to pack(x).
PackedSplatBuffer repack(std::span<const UnpackedSplat> splats, int degree, ColorMode mode);

// Flat container: "VSPK", version (1 = SH color, 2 = raw RGB), count,
// degree, all u32 little-endian, then pos_opacity, cov6, color words.
std::vector<std::byte> serialize_packed(const PackedSplatBuffer& buffer);
PackedSplatBuffer deserialize_packed(std::span<const std::byte> bytes);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace hsplat
