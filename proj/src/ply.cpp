#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <string_view>

#include "hsplat/asset_io.hpp"
#include "hsplat/error.hpp"

namespace hsplat {

namespace {

enum class ScalarType { i8, u8, i16, u16, i32, u32, f32, f64 };

std::optional<ScalarType> scalar_type(std::string_view name) {
    static const std::map<std::string_view, ScalarType> kTypes = {
        {"char", ScalarType::i8},    {"int8", ScalarType::i8},     {"uchar", ScalarType::u8},
        {"uint8", ScalarType::u8},   {"short", ScalarType::i16},   {"int16", ScalarType::i16},
        {"ushort", ScalarType::u16}, {"uint16", ScalarType::u16},  {"int", ScalarType::i32},
        {"int32", ScalarType::i32},  {"uint", ScalarType::u32},    {"uint32", ScalarType::u32},
        {"float", ScalarType::f32},  {"float32", ScalarType::f32}, {"double", ScalarType::f64},
        {"float64", ScalarType::f64},
    };
    auto it = kTypes.find(name);
    if (it == kTypes.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t type_size(ScalarType t) {
    switch (t) {
    case ScalarType::i8:
    case ScalarType::u8: return 1;
    case ScalarType::i16:
    case ScalarType::u16: return 2;
    case ScalarType::i32:
    case ScalarType::u32:
    case ScalarType::f32: return 4;
    case ScalarType::f64: return 8;
    }
    return 0;
}

template <typename T>
T load_le(const std::byte* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;  // host is little-endian (checked at compile time below)
}

static_assert(std::endian::native == std::endian::little, "PLY reader assumes a little-endian host");

double read_scalar(const std::byte* p, ScalarType t) {
    switch (t) {
    case ScalarType::i8: return load_le<std::int8_t>(p);
    case ScalarType::u8: return load_le<std::uint8_t>(p);
    case ScalarType::i16: return load_le<std::int16_t>(p);
    case ScalarType::u16: return load_le<std::uint16_t>(p);
    case ScalarType::i32: return load_le<std::int32_t>(p);
    case ScalarType::u32: return load_le<std::uint32_t>(p);
    case ScalarType::f32: return load_le<float>(p);
    case ScalarType::f64: return load_le<double>(p);
    }
    return 0.0;
}

struct Property {
    std::string name;
    ScalarType type;
    std::size_t offset;
};

struct Element {
    std::string name;
    std::uint64_t count = 0;
    std::vector<Property> properties;
    std::size_t stride = 0;
    bool has_list = false;
};

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

float sigmoid_open(double raw) {
    const double s = 1.0 / (1.0 + std::exp(-raw));
    // keep opacity strictly inside (0, 1) after rounding to float
    constexpr float lo = std::numeric_limits<float>::min();
    constexpr float hi = 1.0f - std::numeric_limits<float>::epsilon() / 2.0f;
    return std::clamp(static_cast<float>(s), lo, hi);
}

constexpr std::size_t kMaxHeaderBytes = 1 << 16;

}  // namespace

std::vector<GaussianSource> parse_splat_ply(std::span<const std::byte> bytes) {
    const std::string_view text(reinterpret_cast<const char*>(bytes.data()),
                                std::min(bytes.size(), kMaxHeaderBytes));
    if (!text.starts_with("ply")) {
        throw Error(ErrorCode::parse, "missing 'ply' magic");
    }
    const std::size_t end_marker = text.find("end_header");
    if (end_marker == std::string_view::npos) {
        throw Error(ErrorCode::parse, "missing end_header");
    }
    std::size_t payload_start = text.find('\n', end_marker);
    if (payload_start == std::string_view::npos) {
        throw Error(ErrorCode::bounds, "header not terminated by newline");
    }
    ++payload_start;

    std::vector<Element> elements;
    bool saw_format = false;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < end_marker) {
        std::size_t eol = text.find('\n', pos);
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0] == "ply" || tok[0] == "comment" || tok[0] == "obj_info") {
            continue;
        }
        if (tok[0] == "format") {
            if (tok.size() < 2) {
                throw Error(ErrorCode::parse, "malformed format line");
            }
            if (tok[1] != "binary_little_endian") {
                throw Error(ErrorCode::unsupported_format,
                            "only binary_little_endian PLY is supported (got " + std::string(tok[1]) + ")");
            }
            saw_format = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) {
                throw Error(ErrorCode::parse, "malformed element line " + std::to_string(line_no));
            }
            Element el;
            el.name = std::string(tok[1]);
            auto [ptr, ec] = std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), el.count);
            if (ec != std::errc() || ptr != tok[2].data() + tok[2].size()) {
                throw Error(ErrorCode::parse, "bad element count on line " + std::to_string(line_no));
            }
            elements.push_back(std::move(el));
        } else if (tok[0] == "property") {
            if (elements.empty()) {
                throw Error(ErrorCode::parse, "property before any element");
            }
            Element& el = elements.back();
            if (tok.size() >= 2 && tok[1] == "list") {
                el.has_list = true;
                continue;
            }
            if (tok.size() != 3) {
                throw Error(ErrorCode::parse, "malformed property line " + std::to_string(line_no));
            }
            const auto type = scalar_type(tok[1]);
            if (!type) {
                throw Error(ErrorCode::parse, "unknown property type '" + std::string(tok[1]) + "'");
            }
            el.properties.push_back({std::string(tok[2]), *type, el.stride});
            el.stride += type_size(*type);
        } else {
            throw Error(ErrorCode::parse, "unexpected header keyword '" + std::string(tok[0]) + "'");
        }
    }
    if (!saw_format) {
        throw Error(ErrorCode::parse, "missing format line");
    }

    std::size_t offset = payload_start;
    const Element* vertex = nullptr;
    for (const Element& el : elements) {
        if (el.name == "vertex") {
            vertex = &el;
            break;
        }
        if (el.has_list) {
            throw Error(ErrorCode::unsupported_format, "list properties before the vertex element");
        }
        if (el.stride != 0 && el.count > (bytes.size() - std::min(offset, bytes.size())) / el.stride) {
            throw Error(ErrorCode::bounds, "element '" + el.name + "' runs past end of file");
        }
        offset += static_cast<std::size_t>(el.count) * el.stride;
    }
    if (vertex == nullptr) {
        throw Error(ErrorCode::schema, "missing vertex element");
    }
    if (vertex->has_list) {
        throw Error(ErrorCode::unsupported_format, "list properties in the vertex element");
    }

    auto find = [&](const std::string& name) -> const Property* {
        for (const Property& p : vertex->properties) {
            if (p.name == name) {
                return &p;
            }
        }
        return nullptr;
    };
    auto require = [&](const std::string& name) -> const Property& {
        const Property* p = find(name);
        if (p == nullptr) {
            throw Error(ErrorCode::schema, "missing required property " + name);
        }
        return *p;
    };

    static const char* kRequired[] = {"x",       "y",       "z",       "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                                      "scale_0", "scale_1", "scale_2", "rot_0",  "rot_1",  "rot_2",  "rot_3"};
    std::vector<const Property*> req;
    for (const char* name : kRequired) {
        req.push_back(&require(name));
    }

    std::size_t rest_count = 0;
    while (find("f_rest_" + std::to_string(rest_count)) != nullptr) {
        ++rest_count;
    }
    int degree = -1;
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (static_cast<std::size_t>(sh_coeff_count(d) * 3 - 3) == rest_count) {
            degree = d;
        }
    }
    if (degree < 0) {
        throw Error(ErrorCode::schema, "f_rest count " + std::to_string(rest_count) + " matches no SH degree");
    }
    std::vector<const Property*> rest;
    for (std::size_t i = 0; i < rest_count; ++i) {
        rest.push_back(find("f_rest_" + std::to_string(i)));
    }

    const std::size_t stride = vertex->stride;
    const std::size_t available = bytes.size() - std::min(offset, bytes.size());
    if (stride == 0 || vertex->count > available / stride) {
        throw Error(ErrorCode::bounds, "vertex payload truncated: need " + std::to_string(vertex->count) +
                                           " x " + std::to_string(stride) + " bytes, have " +
                                           std::to_string(available));
    }

    const std::size_t coeffs = static_cast<std::size_t>(sh_coeff_count(degree));
    const std::size_t rest_per_channel = coeffs - 1;
    std::vector<GaussianSource> out;
    out.reserve(static_cast<std::size_t>(vertex->count));
    for (std::uint64_t i = 0; i < vertex->count; ++i) {
        const std::byte* row = bytes.data() + offset + static_cast<std::size_t>(i) * stride;
        auto value = [&](const Property& p) {
            const double v = read_scalar(row + p.offset, p.type);
            if (!std::isfinite(v)) {
                throw Error(ErrorCode::parse, "non-finite " + p.name + " at vertex " + std::to_string(i));
            }
            return v;
        };
        GaussianSource g;
        g.degree = degree;
        g.position = Vec3f(float(value(*req[0])), float(value(*req[1])), float(value(*req[2])));
        g.sh.assign(coeffs, Vec3f::Zero());
        g.sh[0] = Vec3f(float(value(*req[3])), float(value(*req[4])), float(value(*req[5])));
        // f_rest is channel-major: all R coefficients, then G, then B
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t k = 0; k < rest_per_channel; ++k) {
                g.sh[k + 1][static_cast<Eigen::Index>(c)] = float(value(*rest[c * rest_per_channel + k]));
            }
        }
        g.opacity = sigmoid_open(value(*req[6]));
        for (int a = 0; a < 3; ++a) {
            // clamp keeps scale^2 finite in float
            g.scale[a] = static_cast<float>(std::exp(std::clamp(value(*req[7 + a]), -40.0, 40.0)));
        }
        const double w = value(*req[10]), x = value(*req[11]), y = value(*req[12]), z = value(*req[13]);
        const double n = std::sqrt(w * w + x * x + y * y + z * z);
        if (!(n > 1e-12) || !std::isfinite(n)) {
            throw Error(ErrorCode::parse, "zero-norm rotation at vertex " + std::to_string(i));
        }
        g.rotation = {float(w / n), float(x / n), float(y / n), float(z / n)};
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<GaussianSource> load_splat_ply(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_splat_ply(bytes);
}

std::vector<std::byte> write_splat_ply(std::span<const GaussianSource> sources) {
    const int degree = sources.empty() ? 0 : sources.front().degree;
    const std::size_t coeffs = static_cast<std::size_t>(sh_coeff_count(degree));
    const std::size_t rest = coeffs * 3 - 3;

    std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                         std::to_string(sources.size()) + "\n";
    for (const char* name : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"}) {
        header += std::string("property float ") + name + "\n";
    }
    for (std::size_t i = 0; i < rest; ++i) {
        header += "property float f_rest_" + std::to_string(i) + "\n";
    }
    for (const char* name : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        header += std::string("property float ") + name + "\n";
    }
    header += "end_header\n";

    std::vector<float> row;
    std::vector<std::byte> out(header.size());
    std::memcpy(out.data(), header.data(), header.size());
    for (const GaussianSource& g : sources) {
        if (g.degree != degree || g.sh.size() != coeffs) {
            throw Error(ErrorCode::invalid_input, "write_splat_ply needs one shared SH degree");
        }
        row.clear();
        row.insert(row.end(), {g.position.x(), g.position.y(), g.position.z(), 0.0f, 0.0f, 0.0f});
        row.insert(row.end(), {g.sh[0].x(), g.sh[0].y(), g.sh[0].z()});
        for (int c = 0; c < 3; ++c) {
            for (std::size_t k = 1; k < coeffs; ++k) {
                row.push_back(g.sh[k][c]);
            }
        }
        const double a = g.opacity;
        row.push_back(static_cast<float>(std::log(a / (1.0 - a))));
        for (int i = 0; i < 3; ++i) {
            row.push_back(std::log(g.scale[i]));
        }
        row.insert(row.end(), {g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z});
        const std::size_t at = out.size();
        out.resize(at + row.size() * sizeof(float));
        std::memcpy(out.data() + at, row.data(), row.size() * sizeof(float));
    }
    return out;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open " + path.string());
    }
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::byte> bytes(size);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw Error(ErrorCode::io, "short read from " + path.string());
    }
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
}

}  // namespace hsplat
