#include "hsplat/session.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "hsplat/scene_io.hpp"

namespace hsplat {

namespace {

struct Outgoing {
    bool is_frame = false;
    std::string text;  // control message, or the stats following a frame
    std::vector<std::uint8_t> frame;
};

struct Shared {
    std::mutex mutex;
    std::condition_variable render_cv;
    std::condition_variable write_cv;

    // control state, latest wins
    msg::CameraUpdate camera;
    float time = 0.0f;
    std::optional<PoseParams> pose;
    SortStrategy strategy;
    bool strategy_changed = false;
    std::map<std::uint32_t, Mat4f> pending_transforms;
    std::optional<std::vector<PostFilter>> pending_filters;
    FrameEncoding encoding = FrameEncoding::raw_rgba8;
    std::uint64_t seq = 0;
    bool greeted = false;
    bool dirty = false;
    bool stop = false;

    // outbox
    std::deque<Outgoing> outbox;
    std::size_t frames_queued = 0;
    std::uint64_t frames_dropped = 0;
    bool peer_gone = false;
    bool writer_finish = false;
    std::optional<std::pair<std::uint16_t, std::string>> close_request;
};

void push_text(Shared& s, std::string text) {
    s.outbox.push_back({false, std::move(text), {}});
    s.write_cv.notify_one();
}

void push_frame(Shared& s, std::vector<std::uint8_t> frame, std::string stats, std::size_t capacity) {
    while (s.frames_queued >= std::max<std::size_t>(capacity, 1)) {
        for (auto it = s.outbox.begin(); it != s.outbox.end(); ++it) {
            if (it->is_frame) {
                s.outbox.erase(it);
                --s.frames_queued;
                ++s.frames_dropped;
                break;
            }
        }
    }
    s.outbox.push_back({true, std::move(stats), std::move(frame)});
    ++s.frames_queued;
    s.write_cv.notify_one();
}

struct Apply {
    Shared& s;
    const Scene& scene;
    const SessionOptions& options;

    void operator()(const msg::Hello& h) {
        if (h.encoding) {
            s.encoding = *h.encoding;
        }
        s.greeted = true;
        push_text(s, scene_info_json(scene, {options.viewport, s.strategy.token(), s.encoding}));
    }
    void operator()(const msg::CameraUpdate& c) { s.camera = c; }
    void operator()(const msg::SetTime& t) { s.time = t.t; }
    void operator()(const msg::SetPose& p) { s.pose = p.pose; }
    void operator()(const msg::SetStrategy& st) {
        s.strategy = st.strategy;
        s.strategy_changed = true;
    }
    void operator()(const msg::SetModelTransform& m) {
        if (!scene.find(m.model_id)) {
            push_text(s, error_message_json(ErrorCode::invalid_input,
                                            "no model with id " + std::to_string(m.model_id)));
            return;
        }
        s.pending_transforms[m.model_id] = m.matrix;
    }
    void operator()(const msg::SetFilterChain& f) { s.pending_filters = parse_filter_chain(f.tokens); }
};

void reader_loop(Shared& s, const Scene& scene, MessageChannel& channel, const SessionOptions& options,
                 SessionSummary& summary) {
    while (true) {
        auto in = channel.receive();
        std::lock_guard lock(s.mutex);
        if (!in) {
            s.peer_gone = true;
            s.stop = true;
            s.writer_finish = true;
            s.render_cv.notify_all();
            s.write_cv.notify_all();
            return;
        }
        ++summary.messages;
        try {
            if (in->binary) {
                throw Error(ErrorCode::protocol, "control messages must be text");
            }
            const ControlMessage m = parse_control(in->data);
            if (!s.greeted && !std::holds_alternative<msg::Hello>(m)) {
                throw Error(ErrorCode::protocol, "expected hello first");
            }
            std::visit(Apply{s, scene, options}, m);
            ++s.seq;
            s.dirty = true;
            s.render_cv.notify_all();
        } catch (const Error& e) {
            summary.protocol_error = true;
            push_text(s, error_message_json(ErrorCode::protocol, e.what()));
            s.close_request = {kCloseProtocolError, "protocol error"};
            s.stop = true;
            s.writer_finish = true;
            s.render_cv.notify_all();
            s.write_cv.notify_all();
            return;
        }
    }
}

void writer_loop(Shared& s, MessageChannel& channel) {
    while (true) {
        Outgoing item;
        {
            std::unique_lock lock(s.mutex);
            s.write_cv.wait(lock, [&] { return s.peer_gone || !s.outbox.empty() || s.writer_finish; });
            if (s.peer_gone) {
                return;
            }
            if (s.outbox.empty()) {
                break;
            }
            item = std::move(s.outbox.front());
            s.outbox.pop_front();
            if (item.is_frame) {
                --s.frames_queued;
            }
        }
        if (item.is_frame) {
            channel.send_binary(item.frame);
        }
        channel.send_text(item.text);
    }
    std::optional<std::pair<std::uint16_t, std::string>> close;
    {
        std::lock_guard lock(s.mutex);
        close = s.close_request;
    }
    if (close) {
        channel.close(close->first, close->second);
    }
}

}  // namespace

Camera session_camera(const msg::CameraUpdate& c, const SessionOptions& options) {
    return Camera::orbit(c.yaw, c.pitch, c.radius, c.target, c.fov, options.viewport, options.near_plane,
                         options.far_plane);
}

SessionSummary run_session(const Scene& scene, MessageChannel& channel, const SessionOptions& options) {
    SessionSummary summary;
    Shared s;
    s.camera = options.initial_camera;
    s.strategy = options.strategy;
    s.encoding = options.encoding;

    Scene local = scene;
    RenderOptions ropt;
    ropt.workers = options.workers;
    Renderer renderer(options.strategy, ropt);

    std::thread reader([&] { reader_loop(s, scene, channel, options, summary); });
    std::thread writer([&] { writer_loop(s, channel); });

    const bool continuous = options.continuous_fps > 0.0;
    const auto tick = continuous ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                       std::chrono::duration<double>(1.0 / options.continuous_fps))
                                 : std::chrono::steady_clock::duration::zero();
    std::uint64_t frame_index = 0;
    while (true) {
        msg::CameraUpdate camera;
        float time = 0.0f;
        std::optional<PoseParams> pose;
        FrameEncoding encoding{};
        std::uint64_t seq = 0;
        {
            std::unique_lock lock(s.mutex);
            auto ready = [&] { return s.stop || (s.greeted && s.dirty); };
            if (continuous && s.greeted) {
                if (!s.render_cv.wait_for(lock, tick, ready)) {
                    const double step = 1.0 / (options.continuous_fps * options.time_period_s);
                    s.time = static_cast<float>(std::fmod(static_cast<double>(s.time) + step, 1.0));
                    s.dirty = true;
                }
            } else {
                s.render_cv.wait(lock, ready);
            }
            if (s.stop) {
                break;
            }
            s.dirty = false;
            camera = s.camera;
            time = s.time;
            pose = s.pose;
            encoding = s.encoding;
            seq = s.seq;
            if (s.strategy_changed) {
                renderer.set_strategy(s.strategy);
                s.strategy_changed = false;
            }
            for (const auto& [id, m] : s.pending_transforms) {
                local.find(id)->transform = m;
            }
            s.pending_transforms.clear();
            if (s.pending_filters) {
                local.filters = std::move(*s.pending_filters);
                s.pending_filters.reset();
            }
        }
        try {
            const Camera cam = session_camera(camera, options);
            const auto frame = renderer.render(local, cam, make_inputs(local, cam, time, pose, frame_index));
            auto bytes = encode_frame_message(frame.image, encoding);
            auto stats = stats_message_json(frame.stats, frame.inversions, frame_index, seq,
                                            renderer.strategy().token());
            ++frame_index;
            std::lock_guard lock(s.mutex);
            push_frame(s, std::move(bytes), std::move(stats), options.outbox_frames);
        } catch (const Error& e) {
            std::lock_guard lock(s.mutex);
            push_text(s, error_message_json(e.code(), e.what()));
        }
    }

    reader.join();
    writer.join();
    summary.frames_rendered = frame_index;
    summary.frames_dropped = s.frames_dropped;
    return summary;
}

// ---------------------------------------------------------------------------

void InMemoryChannel::client_send(std::string text) {
    std::lock_guard lock(mutex_);
    to_server_.push_back({false, std::move(text)});
    cv_.notify_all();
}

void InMemoryChannel::client_send_binary(std::string bytes) {
    std::lock_guard lock(mutex_);
    to_server_.push_back({true, std::move(bytes)});
    cv_.notify_all();
}

void InMemoryChannel::client_disconnect() {
    std::lock_guard lock(mutex_);
    client_gone_ = true;
    cv_.notify_all();
}

std::optional<ChannelMessage> InMemoryChannel::client_receive(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    if (!cv_.wait_for(lock, timeout, [&] { return !to_client_.empty(); })) {
        return std::nullopt;
    }
    auto m = std::move(to_client_.front());
    to_client_.pop_front();
    return m;
}

std::optional<std::uint16_t> InMemoryChannel::close_code() const {
    std::lock_guard lock(mutex_);
    return close_code_;
}

void InMemoryChannel::set_send_delay(std::chrono::milliseconds d) {
    std::lock_guard lock(mutex_);
    send_delay_ = d;
}

std::optional<ChannelMessage> InMemoryChannel::receive() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return !to_server_.empty() || client_gone_ || close_code_; });
    if (to_server_.empty()) {
        return std::nullopt;
    }
    auto m = std::move(to_server_.front());
    to_server_.pop_front();
    return m;
}

void InMemoryChannel::send_text(const std::string& text) {
    std::chrono::milliseconds delay;
    {
        std::lock_guard lock(mutex_);
        delay = send_delay_;
    }
    if (delay.count() > 0) {
        std::this_thread::sleep_for(delay);
    }
    std::lock_guard lock(mutex_);
    to_client_.push_back({false, text});
    cv_.notify_all();
}

void InMemoryChannel::send_binary(std::span<const std::uint8_t> bytes) {
    std::lock_guard lock(mutex_);
    to_client_.push_back({true, std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size())});
    cv_.notify_all();
}

void InMemoryChannel::close(std::uint16_t code, const std::string&) {
    std::lock_guard lock(mutex_);
    close_code_ = code;
    cv_.notify_all();
}

}  // namespace hsplat
