#include <cmath>
#include <cstring>

#include "hsplat/asset_io.hpp"
#include "hsplat/error.hpp"
#include "hsplat/half.hpp"

namespace hsplat {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'P', 'K'};
constexpr std::uint32_t kVersionSh = 1;
constexpr std::uint32_t kVersionRawRgb = 2;

class Packer {
public:
    Packer(PackedSplatBuffer& buf, std::size_t count) : buf_(buf) {
        buf_.count = static_cast<std::uint32_t>(count);
        buf_.pos_opacity.reserve(count * PackedSplatBuffer::kPosWords);
        buf_.cov6.reserve(count * PackedSplatBuffer::kCovWords);
        buf_.color.reserve(count * buf_.color_words());
    }

    void add(const Vec3f& position, float opacity, const Sym3& cov, std::span<const Vec3f> color) {
        if (!(opacity >= 0.0f && opacity <= 1.0f)) {
            throw Error(ErrorCode::invalid_input, "opacity outside [0,1]");
        }
        buf_.pos_opacity.push_back(word(position.x(), position.y()));
        buf_.pos_opacity.push_back(word(position.z(), opacity));
        buf_.cov6.push_back(word(cov.xx, cov.xy));
        buf_.cov6.push_back(word(cov.xz, cov.yy));
        buf_.cov6.push_back(word(cov.yz, cov.zz));

        if (color.size() != buf_.coeffs_per_gaussian()) {
            throw Error(ErrorCode::invalid_input, "color coefficient count mismatch");
        }
        halfs_.clear();
        for (const Vec3f& c : color) {
            halfs_.insert(halfs_.end(), {c.x(), c.y(), c.z()});
        }
        if (halfs_.size() % 2 != 0) {
            halfs_.push_back(0.0f);
        }
        for (std::size_t i = 0; i < halfs_.size(); i += 2) {
            buf_.color.push_back(word(halfs_[i], halfs_[i + 1]));
        }
    }

private:
    static std::uint32_t word(float lo, float hi) {
        const std::uint32_t w = pack_half2(lo, hi);
        if (!std::isfinite(unpack_half_lo(w)) || !std::isfinite(unpack_half_hi(w))) {
            throw Error(ErrorCode::invalid_input, "value not representable as a finite fp16");
        }
        return w;
    }

    PackedSplatBuffer& buf_;
    std::vector<float> halfs_;
};

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    }
    return v;
}

}  // namespace

Vec3f PackedSplatBuffer::position(std::size_t i) const {
    const std::uint32_t a = pos_opacity[2 * i];
    const std::uint32_t b = pos_opacity[2 * i + 1];
    return {unpack_half_lo(a), unpack_half_hi(a), unpack_half_lo(b)};
}

float PackedSplatBuffer::opacity(std::size_t i) const { return unpack_half_hi(pos_opacity[2 * i + 1]); }

Sym3 PackedSplatBuffer::covariance(std::size_t i) const {
    const std::uint32_t* w = &cov6[3 * i];
    return {unpack_half_lo(w[0]), unpack_half_hi(w[0]), unpack_half_lo(w[1]),
            unpack_half_hi(w[1]), unpack_half_lo(w[2]), unpack_half_hi(w[2])};
}

void PackedSplatBuffer::color_coeffs(std::size_t i, std::span<Vec3f> out) const {
    const std::size_t words = color_words();
    const std::uint32_t* w = &color[words * i];
    auto half_at = [&](std::size_t h) { return h % 2 == 0 ? unpack_half_lo(w[h / 2]) : unpack_half_hi(w[h / 2]); };
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = Vec3f(half_at(3 * k), half_at(3 * k + 1), half_at(3 * k + 2));
    }
}

void PackedSplatBuffer::validate() const {
    if (degree < 0 || degree > kMaxShDegree) {
        throw Error(ErrorCode::invalid_input, "packed buffer degree out of range");
    }
    if (pos_opacity.size() != std::size_t{count} * kPosWords || cov6.size() != std::size_t{count} * kCovWords ||
        color.size() != std::size_t{count} * color_words()) {
        throw Error(ErrorCode::invalid_input, "packed buffer array lengths disagree with count");
    }
}

PackedSplatBuffer pack_buffer(std::span<const GaussianSource> sources) {
    PackedSplatBuffer buf;
    buf.degree = sources.empty() ? 0 : sources.front().degree;
    buf.color_mode = ColorMode::sh;
    Packer packer(buf, sources.size());
    for (const GaussianSource& g : sources) {
        if (g.degree != buf.degree) {
            throw Error(ErrorCode::invalid_input, "pack_buffer: mixed SH degrees");
        }
        packer.add(g.position, g.opacity, covariance3d(g.scale, quat_to_rotmat(g.rotation)), g.sh);
    }
    return buf;
}

PackedSplatBuffer pack_batch(const GaussianBatch& batch) {
    batch.validate();
    PackedSplatBuffer buf;
    buf.degree = batch.meta.degree;
    buf.color_mode = batch.meta.color_mode;
    Packer packer(buf, batch.meta.count);
    const std::size_t coeffs = batch.coeffs_per_gaussian();
    for (std::size_t i = 0; i < batch.meta.count; ++i) {
        packer.add(batch.positions[i], batch.opacity[i], batch.covariance(i),
                   std::span<const Vec3f>(batch.color).subspan(i * coeffs, coeffs));
    }
    return buf;
}

std::vector<UnpackedSplat> unpack_buffer(const PackedSplatBuffer& buffer) {
    buffer.validate();
    std::vector<UnpackedSplat> out(buffer.count);
    for (std::size_t i = 0; i < buffer.count; ++i) {
        out[i].position = buffer.position(i);
        out[i].opacity = buffer.opacity(i);
        out[i].covariance = buffer.covariance(i);
        out[i].color.resize(buffer.coeffs_per_gaussian());
        buffer.color_coeffs(i, out[i].color);
    }
    return out;
}

PackedSplatBuffer repack(std::span<const UnpackedSplat> splats, int degree, ColorMode mode) {
    PackedSplatBuffer buf;
    buf.degree = degree;
    buf.color_mode = mode;
    Packer packer(buf, splats.size());
    for (const UnpackedSplat& s : splats) {
        packer.add(s.position, s.opacity, s.covariance, s.color);
    }
    return buf;
}

std::vector<std::byte> serialize_packed(const PackedSplatBuffer& buffer) {
    buffer.validate();
    std::vector<std::byte> out;
    out.reserve(16 + 4 * (buffer.pos_opacity.size() + buffer.cov6.size() + buffer.color.size()));
    for (char c : kMagic) {
        out.push_back(static_cast<std::byte>(c));
    }
    put_u32(out, buffer.color_mode == ColorMode::raw_rgb ? kVersionRawRgb : kVersionSh);
    put_u32(out, buffer.count);
    put_u32(out, static_cast<std::uint32_t>(buffer.degree));
    for (const auto* words : {&buffer.pos_opacity, &buffer.cov6, &buffer.color}) {
        for (std::uint32_t w : *words) {
            put_u32(out, w);
        }
    }
    return out;
}

PackedSplatBuffer deserialize_packed(std::span<const std::byte> bytes) {
    if (bytes.size() < 16) {
        throw Error(ErrorCode::bounds, "packed container shorter than its header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::parse, "bad packed container magic");
    }
    PackedSplatBuffer buf;
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kVersionSh && version != kVersionRawRgb) {
        throw Error(ErrorCode::unsupported_format, "unknown packed container version " + std::to_string(version));
    }
    buf.color_mode = version == kVersionRawRgb ? ColorMode::raw_rgb : ColorMode::sh;
    buf.count = get_u32(bytes, 8);
    const std::uint32_t degree = get_u32(bytes, 12);
    if (degree > static_cast<std::uint32_t>(kMaxShDegree)) {
        throw Error(ErrorCode::parse, "packed container degree out of range");
    }
    buf.degree = static_cast<int>(degree);

    const std::size_t per = PackedSplatBuffer::kPosWords + PackedSplatBuffer::kCovWords + buf.color_words();
    if ((bytes.size() - 16) / 4 / per < buf.count || (bytes.size() - 16) != std::size_t{buf.count} * per * 4) {
        throw Error(ErrorCode::bounds, "packed container payload size does not match count");
    }
    std::size_t at = 16;
    auto read_words = [&](std::vector<std::uint32_t>& words, std::size_t n) {
        words.resize(n);
        for (std::size_t i = 0; i < n; ++i, at += 4) {
            words[i] = get_u32(bytes, at);
        }
    };
    read_words(buf.pos_opacity, std::size_t{buf.count} * PackedSplatBuffer::kPosWords);
    read_words(buf.cov6, std::size_t{buf.count} * PackedSplatBuffer::kCovWords);
    read_words(buf.color, std::size_t{buf.count} * buf.color_words());
    return buf;
}

}  // namespace hsplat
