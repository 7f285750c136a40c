#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hsplat/error.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

// ---------------------------------------------------------------------------
// Client -> server (JSON text, discriminated by "type")

enum class FrameEncoding : std::uint8_t { raw_rgba8 = 0, png = 1 };

std::string_view encoding_token(FrameEncoding e);
FrameEncoding parse_encoding(std::string_view token);

namespace msg {

struct Hello {
    std::optional<FrameEncoding> encoding;
    friend bool operator==(const Hello&, const Hello&) = default;
};
struct CameraUpdate {
    float yaw = 0, pitch = 0, radius = 4;
    Vec3f target = Vec3f::Zero();
    float fov = 0.87266f;  // vertical, radians
    friend bool operator==(const CameraUpdate&, const CameraUpdate&) = default;
};
struct SetTime {
    float t = 0;
    friend bool operator==(const SetTime&, const SetTime&) = default;
};
struct SetPose {
    PoseParams pose;
    friend bool operator==(const SetPose&, const SetPose&) = default;
};
struct SetStrategy {
    SortStrategy strategy;
    friend bool operator==(const SetStrategy&, const SetStrategy&) = default;
};
struct SetModelTransform {
    std::uint32_t model_id = 0;
    Mat4f matrix = Mat4f::Identity();
    friend bool operator==(const SetModelTransform&, const SetModelTransform&) = default;
};
struct SetFilterChain {
    std::vector<std::string> tokens;
    friend bool operator==(const SetFilterChain&, const SetFilterChain&) = default;
};

}  // namespace msg

using ControlMessage = std::variant<msg::Hello, msg::CameraUpdate, msg::SetTime, msg::SetPose, msg::SetStrategy,
                                    msg::SetModelTransform, msg::SetFilterChain>;

// Throws protocol on malformed JSON, unknown types, missing or non-finite
// fields and bad strategy/filter tokens.
ControlMessage parse_control(std::string_view text);
std::string control_json(const ControlMessage& m);

// ---------------------------------------------------------------------------
// Server -> client

// Binary frame: tag 0x02 | u16 width | u16 height | u8 encoding | u32 length | payload (little-endian).
constexpr std::uint8_t kFrameTag = 0x02;
constexpr std::size_t kFrameHeaderBytes = 10;
constexpr std::size_t kMaxFramePayload = 64u << 20;

struct FrameMessage {
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    FrameEncoding encoding = FrameEncoding::raw_rgba8;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const FrameMessage&, const FrameMessage&) = default;
};

std::vector<std::uint8_t> encode_frame_message(const Image& img, FrameEncoding encoding);
std::vector<std::uint8_t> serialize_frame(const FrameMessage& frame);
// Checks the header and that the payload length matches the encoding.
FrameMessage decode_frame_message(std::span<const std::uint8_t> bytes);
Rgba8Image frame_pixels(const FrameMessage& frame);

struct SceneSummary {
    Viewport viewport;
    std::string strategy;
    FrameEncoding encoding = FrameEncoding::raw_rgba8;
};

std::string scene_info_json(const Scene& scene, const SceneSummary& summary);
// `seq` is the number of control messages applied before the frame was rendered.
std::string stats_message_json(const FrameStats& stats, std::uint64_t inversions, std::uint64_t frame,
                               std::uint64_t seq, std::string_view strategy);
std::string error_message_json(ErrorCode code, std::string_view message);
std::string_view error_code_token(ErrorCode code);

}  // namespace hsplat
