#include "hsplat/protocol.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "json.hpp"

#include "hsplat/error.hpp"
#include "hsplat/scene_io.hpp"

namespace hsplat {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::protocol, what); }

float number(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        fail(std::string("field '") + key + "' must be a number");
    }
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v) || std::abs(v) > std::numeric_limits<float>::max()) {
        fail(std::string("field '") + key + "' must be finite");
    }
    return static_cast<float>(v);
}

std::vector<float> numbers(const json& j, const char* key, std::size_t n) {
    if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != n) {
        fail(std::string("field '") + key + "' must be an array of " + std::to_string(n) + " numbers");
    }
    std::vector<float> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            fail(std::string("field '") + key + "' must hold finite numbers");
        }
        out.push_back(v.get<float>());
    }
    return out;
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
        out.push_back(static_cast<std::uint8_t>(v >> s));
    }
}

struct ToJson {
    json operator()(const msg::Hello& m) const {
        json j = {{"type", "hello"}};
        if (m.encoding) {
            j["encoding"] = encoding_token(*m.encoding);
        }
        return j;
    }
    json operator()(const msg::CameraUpdate& m) const {
        return {{"type", "camera"}, {"yaw", m.yaw}, {"pitch", m.pitch}, {"radius", m.radius},
                {"target", {m.target.x(), m.target.y(), m.target.z()}}, {"fov", m.fov}};
    }
    json operator()(const msg::SetTime& m) const { return {{"type", "set_time"}, {"t", m.t}}; }
    json operator()(const msg::SetPose& m) const {
        json j = pose_json(m.pose);
        j["type"] = "set_pose";
        return j;
    }
    json operator()(const msg::SetStrategy& m) const {
        return {{"type", "set_strategy"}, {"token", m.strategy.token()}};
    }
    json operator()(const msg::SetModelTransform& m) const {
        json mat = json::array();
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) {
                mat.push_back(m.matrix(r, c));
            }
        }
        return {{"type", "set_model_transform"}, {"model_id", m.model_id}, {"matrix", mat}};
    }
    json operator()(const msg::SetFilterChain& m) const { return {{"type", "set_filter_chain"}, {"tokens", m.tokens}}; }
};

}  // namespace

std::string_view encoding_token(FrameEncoding e) { return e == FrameEncoding::png ? "png" : "raw"; }

FrameEncoding parse_encoding(std::string_view token) {
    if (token == "raw" || token == "raw-rgba8") {
        return FrameEncoding::raw_rgba8;
    }
    if (token == "png") {
        return FrameEncoding::png;
    }
    throw Error(ErrorCode::invalid_input, "unknown frame encoding '" + std::string(token) + "'");
}

ControlMessage parse_control(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("malformed json: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        fail("message needs a string 'type'");
    }
    const std::string type = j.at("type").get<std::string>();
    try {
        if (type == "hello") {
            msg::Hello h;
            if (j.contains("encoding")) {
                if (!j.at("encoding").is_string()) {
                    fail("encoding must be a string");
                }
                h.encoding = parse_encoding(j.at("encoding").get<std::string>());
            }
            return h;
        }
        if (type == "camera") {
            msg::CameraUpdate c;
            c.yaw = number(j, "yaw");
            c.pitch = number(j, "pitch");
            c.radius = number(j, "radius");
            const auto t = numbers(j, "target", 3);
            c.target = Vec3f(t[0], t[1], t[2]);
            c.fov = number(j, "fov");
            if (!(c.radius > 0.0f)) {
                fail("radius must be positive");
            }
            if (!(c.fov > 0.0f && c.fov < 3.1f)) {
                fail("fov must lie in (0, pi)");
            }
            return c;
        }
        if (type == "set_time") {
            return msg::SetTime{number(j, "t")};
        }
        if (type == "set_pose") {
            return msg::SetPose{parse_pose(j)};
        }
        if (type == "set_strategy") {
            if (!j.contains("token") || !j.at("token").is_string()) {
                fail("set_strategy needs a string 'token'");
            }
            return msg::SetStrategy{SortStrategy::parse(j.at("token").get<std::string>())};
        }
        if (type == "set_model_transform") {
            if (!j.contains("model_id") || !j.at("model_id").is_number_unsigned()) {
                fail("model_id must be a non-negative integer");
            }
            msg::SetModelTransform m;
            m.model_id = j.at("model_id").get<std::uint32_t>();
            const auto v = numbers(j, "matrix", 16);
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) {
                    m.matrix(r, c) = v[static_cast<std::size_t>(r * 4 + c)];
                }
            }
            return m;
        }
        if (type == "set_filter_chain") {
            if (!j.contains("tokens") || !j.at("tokens").is_array()) {
                fail("set_filter_chain needs 'tokens'");
            }
            msg::SetFilterChain f{j.at("tokens").get<std::vector<std::string>>()};
            parse_filter_chain(f.tokens);
            return f;
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::protocol) {
            throw;
        }
        fail(e.what());
    } catch (const json::exception& e) {
        fail(e.what());
    }
    fail("unknown message type '" + type + "'");
}

std::string control_json(const ControlMessage& m) { return std::visit(ToJson{}, m).dump(); }

std::vector<std::uint8_t> serialize_frame(const FrameMessage& frame) {
    if (frame.payload.size() > kMaxFramePayload) {
        throw Error(ErrorCode::encode, "frame payload exceeds 64 MiB");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderBytes + frame.payload.size());
    out.push_back(kFrameTag);
    put16(out, frame.width);
    put16(out, frame.height);
    out.push_back(static_cast<std::uint8_t>(frame.encoding));
    put32(out, static_cast<std::uint32_t>(frame.payload.size()));
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

std::vector<std::uint8_t> encode_frame_message(const Image& img, FrameEncoding encoding) {
    if (img.width <= 0 || img.height <= 0 || img.width > 0xFFFF || img.height > 0xFFFF) {
        throw Error(ErrorCode::encode, "frame dimensions must fit in 16 bits");
    }
    const std::size_t raw = static_cast<std::size_t>(img.width) * img.height * 4;
    if (encoding == FrameEncoding::raw_rgba8 && raw > kMaxFramePayload) {
        throw Error(ErrorCode::encode, "frame payload exceeds 64 MiB");
    }
    FrameMessage f;
    f.width = static_cast<std::uint16_t>(img.width);
    f.height = static_cast<std::uint16_t>(img.height);
    f.encoding = encoding;
    if (encoding == FrameEncoding::raw_rgba8) {
        f.payload = to_rgba8(img).pixels;
    } else {
        const auto png = encode_png(to_rgba8(img));
        f.payload.resize(png.size());
        std::memcpy(f.payload.data(), png.data(), png.size());
    }
    return serialize_frame(f);
}

FrameMessage decode_frame_message(std::span<const std::uint8_t> b) {
    if (b.size() < kFrameHeaderBytes) {
        fail("frame shorter than its header");
    }
    if (b[0] != kFrameTag) {
        fail("not a frame message");
    }
    FrameMessage f;
    f.width = static_cast<std::uint16_t>(b[1] | (b[2] << 8));
    f.height = static_cast<std::uint16_t>(b[3] | (b[4] << 8));
    if (b[5] > 1) {
        fail("unknown frame encoding id");
    }
    f.encoding = static_cast<FrameEncoding>(b[5]);
    const std::uint32_t len = static_cast<std::uint32_t>(b[6]) | (static_cast<std::uint32_t>(b[7]) << 8) |
                              (static_cast<std::uint32_t>(b[8]) << 16) | (static_cast<std::uint32_t>(b[9]) << 24);
    if (len != b.size() - kFrameHeaderBytes) {
        fail("frame length field disagrees with the message size");
    }
    if (f.encoding == FrameEncoding::raw_rgba8 && len != static_cast<std::size_t>(f.width) * f.height * 4) {
        fail("raw frame payload does not match its dimensions");
    }
    f.payload.assign(b.begin() + kFrameHeaderBytes, b.end());
    return f;
}

Rgba8Image frame_pixels(const FrameMessage& frame) {
    if (frame.encoding == FrameEncoding::raw_rgba8) {
        return {frame.width, frame.height, frame.payload};
    }
    Rgba8Image img = decode_png(std::as_bytes(std::span(frame.payload)));
    if (img.width != frame.width || img.height != frame.height) {
        fail("png frame dimensions disagree with the header");
    }
    return img;
}

std::string_view error_code_token(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::degenerate_depth: return "degenerate_depth";
    case ErrorCode::degenerate_covariance: return "degenerate_covariance";
    case ErrorCode::schema: return "schema";
    case ErrorCode::bounds: return "bounds";
    case ErrorCode::unsupported_format: return "unsupported_format";
    case ErrorCode::parse: return "parse";
    case ErrorCode::missing_input: return "missing_input";
    case ErrorCode::invalid_rig: return "invalid_rig";
    case ErrorCode::invalid_depth: return "invalid_depth";
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::encode: return "encode";
    case ErrorCode::io: return "io";
    }
    return "error";
}

std::string scene_info_json(const Scene& scene, const SceneSummary& summary) {
    json models = json::array();
    for (const auto& m : scene.models) {
        std::string kind = m.generator ? std::string(m.generator->kind()) : (m.packed ? "packed" : "static");
        models.push_back({{"id", m.model_id},
                          {"name", m.name},
                          {"kind", kind},
                          {"count", m.max_count()},
                          {"degree", m.degree()},
                          {"requires_pose", m.requires_pose()},
                          {"precision", m.precision == Precision::fp16 ? "fp16" : "fp32"}});
    }
    return json{{"type", "scene_info"},
                {"models", models},
                {"has_mesh", scene.mesh.has_value()},
                {"joints", scene_joint_count(scene)},
                {"width", summary.viewport.width},
                {"height", summary.viewport.height},
                {"strategy", summary.strategy},
                {"encoding", encoding_token(summary.encoding)}}
        .dump();
}

std::string stats_message_json(const FrameStats& stats, std::uint64_t inversions, std::uint64_t frame,
                               std::uint64_t seq, std::string_view strategy) {
    json j = json::parse(frame_stats_json(stats, inversions));
    j["type"] = "stats";
    j["frame"] = frame;
    j["seq"] = seq;
    j["strategy"] = strategy;
    return j.dump();
}

std::string error_message_json(ErrorCode code, std::string_view message) {
    return json{{"type", "error"}, {"code", error_code_token(code)}, {"message", message}}.dump();
}

}  // namespace hsplat
