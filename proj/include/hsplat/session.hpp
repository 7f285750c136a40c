#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hsplat/protocol.hpp"

namespace hsplat {

struct ChannelMessage {
    bool binary = false;
    std::string data;
};

// Message transport seen by a session. receive() blocks and returns nullopt
// once the peer is gone. Sends come from a single writer thread.
class MessageChannel {
public:
    virtual ~MessageChannel() = default;
    virtual std::optional<ChannelMessage> receive() = 0;
    virtual void send_text(const std::string& text) = 0;
    virtual void send_binary(std::span<const std::uint8_t> bytes) = 0;
    virtual void close(std::uint16_t code, const std::string& reason) = 0;
};

constexpr std::uint16_t kCloseNormal = 1000;
constexpr std::uint16_t kCloseProtocolError = 1002;

struct SessionOptions {
    Viewport viewport{640, 480};
    FrameEncoding encoding = FrameEncoding::raw_rgba8;
    SortStrategy strategy;
    msg::CameraUpdate initial_camera{0.0f, 0.3f, 4.0f, Vec3f::Zero(), 0.87266f};
    float near_plane = 0.05f;
    float far_plane = 200.0f;
    // > 0 advances time automatically at this rate (continuous 4D playback).
    double continuous_fps = 0.0;
    // Seconds for one pass over t in [0, 1) in continuous mode.
    double time_period_s = 4.0;
    // Frame+stats pairs held for a slow client before the oldest is dropped.
    std::size_t outbox_frames = 4;
    int workers = 0;
};

Camera session_camera(const msg::CameraUpdate& c, const SessionOptions& options);

struct SessionSummary {
    std::uint64_t frames_rendered = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t messages = 0;
    bool protocol_error = false;
};

// Serves one client until it disconnects or sends a malformed message.
// `scene` is shared read-only; transform and filter edits stay per session.
SessionSummary run_session(const Scene& scene, MessageChannel& channel, const SessionOptions& options = {});

// Channel for tests and embedding: the client side pushes text and reads
// what the session sent.
class InMemoryChannel final : public MessageChannel {
public:
    // Client side.
    void client_send(std::string text);
    void client_send_binary(std::string bytes);
    void client_disconnect();
    std::optional<ChannelMessage> client_receive(std::chrono::milliseconds timeout);
    std::optional<std::uint16_t> close_code() const;
    // Delay applied to each server send, to emulate a congested link.
    void set_send_delay(std::chrono::milliseconds d);

    // Session side.
    std::optional<ChannelMessage> receive() override;
    void send_text(const std::string& text) override;
    void send_binary(std::span<const std::uint8_t> bytes) override;
    void close(std::uint16_t code, const std::string& reason) override;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<ChannelMessage> to_server_;
    std::deque<ChannelMessage> to_client_;
    bool client_gone_ = false;
    std::optional<std::uint16_t> close_code_;
    std::chrono::milliseconds send_delay_{0};
};

}  // namespace hsplat
