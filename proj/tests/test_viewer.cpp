#include <random>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "hsplat/scene_io.hpp"
#include "hsplat/server.hpp"
#include "hsplat/session.hpp"
#include "json.hpp"
#include "scene_helpers.hpp"
#include "test_util.hpp"

using namespace hsplat;
using namespace hsplat::test;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

Scene small_scene() {
    Scene scene;
    scene.models = {batch_instance(0, random_cloud(2000, 31, 1.0f, 0.02f, 0.08f)),
                    batch_instance(7, random_cloud(500, 32, 0.5f))};
    return scene;
}

SessionOptions small_options() {
    SessionOptions o;
    o.viewport = {64, 48};
    return o;
}

std::string camera_msg(float yaw, float pitch = 0.2f, float radius = 4.5f) {
    return control_json(msg::CameraUpdate{yaw, pitch, radius, Vec3f::Zero(), 0.9f});
}

// Drives run_session on a background thread.
struct LiveSession {
    InMemoryChannel channel;
    SessionSummary summary;
    std::thread thread;

    LiveSession(const Scene& scene, const SessionOptions& options) {
        thread = std::thread([&, options] { summary = run_session(scene, channel, options); });
    }
    ~LiveSession() {
        channel.client_disconnect();
        if (thread.joinable()) {
            thread.join();
        }
    }
    ChannelMessage next() {
        auto m = channel.client_receive(20s);
        REQUIRE(m.has_value());
        return *m;
    }
    json next_json() {
        auto m = next();
        REQUIRE(!m.binary);
        return json::parse(m.data);
    }
    // Reads frame/stats pairs until stats report `seq`; returns the last frame.
    std::pair<FrameMessage, std::vector<json>> until_seq(std::uint64_t seq, int* frames = nullptr) {
        std::vector<json> stats;
        FrameMessage last;
        while (true) {
            auto m = next();
            if (!m.binary) {
                FAIL_CHECK("unexpected text message " << m.data);
                continue;
            }
            last = decode_frame_message(std::span(reinterpret_cast<const std::uint8_t*>(m.data.data()), m.data.size()));
            if (frames) {
                ++*frames;
            }
            const auto s = next_json();
            REQUIRE(s["type"] == "stats");
            stats.push_back(s);
            if (s["seq"].get<std::uint64_t>() >= seq) {
                return {last, stats};
            }
        }
    }
};

}  // namespace

TEST_CASE("frame layout") {
    const Image two(2, 2, Vec3f(1.0f, 0.5f, 0.0f));
    const auto bytes = encode_frame_message(two, FrameEncoding::raw_rgba8);
    REQUIRE(bytes.size() == kFrameHeaderBytes + 16);
    const auto f = decode_frame_message(bytes);
    CHECK(f.payload.size() == 16);
    CHECK(f.width == 2);
    CHECK(frame_pixels(f) == to_rgba8(two));

    const Image vga(640, 480, Vec3f(0.2f, 0.4f, 0.6f));
    const auto png = encode_frame_message(vga, FrameEncoding::png);
    const std::uint32_t len = static_cast<std::uint32_t>(png.size() - kFrameHeaderBytes);
    const std::vector<std::uint8_t> header = {0x02, 0x80, 0x02, 0xE0, 0x01, 0x01, static_cast<std::uint8_t>(len),
                                              static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len >> 16),
                                              static_cast<std::uint8_t>(len >> 24)};
    CHECK(std::vector<std::uint8_t>(png.begin(), png.begin() + 10) == header);
    CHECK(frame_pixels(decode_frame_message(png)) == to_rgba8(vga));
}

TEST_CASE("frame round trip") {
    std::mt19937 rng(41);
    for (int i = 0; i < 200; ++i) {
        FrameMessage m;
        m.width = static_cast<std::uint16_t>(1 + rng() % 40);
        m.height = static_cast<std::uint16_t>(1 + rng() % 40);
        m.encoding = rng() % 2 ? FrameEncoding::png : FrameEncoding::raw_rgba8;
        const std::size_t n = m.encoding == FrameEncoding::raw_rgba8 ? std::size_t{m.width} * m.height * 4 : rng() % 300;
        for (std::size_t k = 0; k < n; ++k) {
            m.payload.push_back(static_cast<std::uint8_t>(rng()));
        }
        CHECK(decode_frame_message(serialize_frame(m)) == m);
    }

    auto good = serialize_frame({2, 1, FrameEncoding::raw_rgba8, std::vector<std::uint8_t>(8, 9)});
    auto code = [](std::vector<std::uint8_t> b) { return error_code_of([&] { decode_frame_message(b); }); };
    CHECK(code({0x02, 1, 0}) == ErrorCode::protocol);
    auto bad_tag = good;
    bad_tag[0] = 0x03;
    CHECK(code(bad_tag) == ErrorCode::protocol);
    auto bad_len = good;
    bad_len.push_back(0);
    CHECK(code(bad_len) == ErrorCode::protocol);
    auto bad_enc = good;
    bad_enc[5] = 7;
    CHECK(code(bad_enc) == ErrorCode::protocol);
    auto bad_dims = good;
    bad_dims[1] = 3;
    CHECK(code(bad_dims) == ErrorCode::protocol);

    FrameMessage huge{1, 1, FrameEncoding::png, std::vector<std::uint8_t>(kMaxFramePayload + 1)};
    CHECK(error_code_of([&] { serialize_frame(huge); }) == ErrorCode::encode);
    CHECK(error_code_of([] { encode_frame_message(Image(70000, 1), FrameEncoding::raw_rgba8); }) == ErrorCode::encode);
    CHECK(error_code_of([] { encode_frame_message(Image(4100, 4100), FrameEncoding::raw_rgba8); }) ==
          ErrorCode::encode);
}

TEST_CASE("control messages") {
    PoseParams pose;
    pose.joint_rotations = {Quat::identity(), Quat{0.5f, 0.5f, 0.5f, 0.5f}};
    pose.root_translation = Vec3f(0, 1, 2);
    Mat4f m = Mat4f::Identity();
    m(0, 3) = 2.5f;
    const std::vector<ControlMessage> all = {
        msg::Hello{},
        msg::Hello{FrameEncoding::png},
        msg::CameraUpdate{0.5f, -0.25f, 3.0f, Vec3f(1, 2, 3), 0.7f},
        msg::SetTime{0.25f},
        msg::SetPose{pose},
        msg::SetStrategy{SortStrategy::parse("lazy:10")},
        msg::SetModelTransform{7, m},
        msg::SetFilterChain{{"gamma:2.2", "box3"}},
    };
    for (const auto& c : all) {
        CHECK(parse_control(control_json(c)) == c);
    }
    CHECK(json::parse(control_json(msg::SetTime{0.25f})) == json{{"type", "set_time"}, {"t", 0.25}});

    for (const char* bad : {
             "not json",
             "[]",
             R"({"yaw": 1})",
             R"({"type": "jump"})",
             R"({"type": 3})",
             R"({"type": "camera", "yaw": 0, "pitch": 0, "radius": 1, "target": [0, 0, 0]})",
             R"({"type": "camera", "yaw": 1e300, "pitch": 0, "radius": 1, "target": [0, 0, 0], "fov": 1})",
             R"({"type": "camera", "yaw": 0, "pitch": 0, "radius": -1, "target": [0, 0, 0], "fov": 1})",
             R"({"type": "camera", "yaw": 0, "pitch": 0, "radius": 1, "target": [0, 0], "fov": 1})",
             R"({"type": "camera", "yaw": "0", "pitch": 0, "radius": 1, "target": [0, 0, 0], "fov": 1})",
             R"({"type": "set_time"})",
             R"({"type": "set_strategy", "token": "fastest"})",
             R"({"type": "set_model_transform", "model_id": -1, "matrix": []})",
             R"({"type": "set_model_transform", "model_id": 0, "matrix": [1, 2, 3]})",
             R"({"type": "set_filter_chain", "tokens": ["sharpen"]})",
             R"({"type": "set_pose", "joint_rotations": [[0, 0, 0]]})",
             R"({"type": "hello", "encoding": "jpeg"})",
         }) {
        CHECK_MESSAGE(error_code_of([&] { parse_control(bad); }) == ErrorCode::protocol, bad);
    }
}

TEST_CASE("session handshake and coalescing") {
    const Scene scene = small_scene();
    const auto options = small_options();
    LiveSession live(scene, options);

    live.channel.client_send(control_json(msg::Hello{}));
    const auto info = live.next_json();
    CHECK(info["type"] == "scene_info");
    REQUIRE(info["models"].size() == 2);
    CHECK(info["models"][0]["id"] == 0);
    CHECK(info["models"][0]["count"] == 2000);
    CHECK(info["models"][1]["id"] == 7);
    CHECK(info["models"][1]["count"] == 500);
    CHECK(info["has_mesh"] == false);
    CHECK(info["width"] == 64);
    live.until_seq(1);

    // three camera updates between frames
    int frames = 0;
    for (float yaw : {0.3f, 0.6f, 0.9f}) {
        live.channel.client_send(camera_msg(yaw));
    }
    auto [last, stats] = live.until_seq(4, &frames);
    CHECK(frames <= 3);
    CHECK(frames >= 1);
    for (std::size_t i = 1; i < stats.size(); ++i) {
        CHECK(stats[i]["frame"].get<int>() == stats[i - 1]["frame"].get<int>() + 1);
        CHECK(stats[i]["seq"] >= stats[i - 1]["seq"]);
    }
    const Camera cam = session_camera(msg::CameraUpdate{0.9f, 0.2f, 4.5f, Vec3f::Zero(), 0.9f}, options);
    const auto offline = render_frame(scene, cam, make_inputs(scene, cam));
    CHECK(frame_pixels(last) == to_rgba8(offline.image));
    CHECK(stats.back()["splats_in"] == 2500);
}

TEST_CASE("session strategy switch reports inversions") {
    const Scene scene = small_scene();
    LiveSession live(scene, small_options());
    live.channel.client_send(control_json(msg::Hello{}));
    live.next_json();
    live.channel.client_send(control_json(msg::SetStrategy{SortStrategy::parse("lazy:10")}));
    live.until_seq(2);
    std::uint64_t seq = 2;
    std::uint64_t worst = 0;
    for (int step = 1; step <= 6; ++step) {
        live.channel.client_send(camera_msg(0.25f * static_cast<float>(step)));
        auto [frame, stats] = live.until_seq(++seq);
        for (const auto& s : stats) {
            CHECK(s["strategy"] == "lazy:10");
            worst = std::max(worst, s["inversions"].get<std::uint64_t>());
        }
    }
    CHECK(worst > 0);
}

TEST_CASE("session edits, render failures and encodings") {
    const Scene scene = small_scene();
    const auto options = small_options();
    LiveSession live(scene, options);
    live.channel.client_send(control_json(msg::Hello{FrameEncoding::png}));
    CHECK(live.next_json()["encoding"] == "png");
    auto [first, s0] = live.until_seq(1);
    CHECK(first.encoding == FrameEncoding::png);

    // unknown model: error text, session continues
    live.channel.client_send(control_json(msg::SetModelTransform{99, Mat4f::Identity()}));
    const auto err = live.next_json();
    CHECK(err["type"] == "error");
    CHECK(err["code"] == "invalid_input");
    live.until_seq(2);

    // singular transform makes rendering fail; a valid one recovers
    live.channel.client_send(control_json(msg::SetModelTransform{7, Mat4f::Zero()}));
    const auto failure = live.next_json();
    CHECK(failure["type"] == "error");
    Mat4f shift = Mat4f::Identity();
    shift(0, 3) = 0.5f;
    live.channel.client_send(control_json(msg::SetModelTransform{7, shift}));
    live.channel.client_send(control_json(msg::SetFilterChain{{"gamma:2.2"}}));
    auto [frame, stats] = live.until_seq(5);

    Scene edited = scene;
    edited.find(7)->transform = shift;
    edited.filters = {PostFilter::parse("gamma:2.2")};
    const Camera cam = session_camera(options.initial_camera, options);
    CHECK(frame_pixels(frame) == to_rgba8(render_frame(edited, cam, make_inputs(edited, cam)).image));
    CHECK(!live.channel.close_code());
}

TEST_CASE("session protocol errors close the connection") {
    const Scene scene = small_scene();
    SUBCASE("camera before hello") {
        LiveSession live(scene, small_options());
        live.channel.client_send(camera_msg(0.1f));
        const auto err = live.next_json();
        CHECK(err["type"] == "error");
        CHECK(err["code"] == "protocol");
        live.thread.join();
        CHECK(live.channel.close_code() == kCloseProtocolError);
        CHECK(live.summary.protocol_error);
    }
    SUBCASE("malformed message mid-session") {
        LiveSession live(scene, small_options());
        live.channel.client_send(control_json(msg::Hello{}));
        live.next_json();
        live.until_seq(1);
        live.channel.client_send("{\"type\": \"camera\", \"yaw\": ");
        live.thread.join();
        bool saw_error = false;
        while (auto m = live.channel.client_receive(0ms)) {
            if (!m->binary && json::parse(m->data)["type"] == "error") {
                saw_error = true;
            }
        }
        CHECK(saw_error);
        CHECK(live.channel.close_code() == kCloseProtocolError);
    }
    SUBCASE("binary control message") {
        LiveSession live(scene, small_options());
        live.channel.client_send_binary("\x02\x00");
        live.thread.join();
        CHECK(live.channel.close_code() == kCloseProtocolError);
    }
    SUBCASE("disconnect ends the session") {
        LiveSession live(scene, small_options());
        live.channel.client_send(control_json(msg::Hello{}));
        live.next_json();
        live.channel.client_disconnect();
        live.thread.join();
        CHECK(!live.channel.close_code());
        CHECK(!live.summary.protocol_error);
    }
}

TEST_CASE("continuous mode with a slow client drops old frames") {
    Scene scene;
    scene.models = {batch_instance(0, random_cloud(200, 33))};
    auto options = small_options();
    options.viewport = {32, 32};
    options.continuous_fps = 400.0;
    options.outbox_frames = 2;
    LiveSession live(scene, options);
    live.channel.set_send_delay(25ms);
    live.channel.client_send(control_json(msg::Hello{}));
    live.next_json();
    // frames keep coming without further input; each is followed by stats
    int frames = 0;
    std::int64_t last_frame = -1;
    while (frames < 8) {
        auto m = live.next();
        REQUIRE(m.binary);
        const auto s = live.next_json();
        REQUIRE(s["type"] == "stats");
        CHECK(s["frame"].get<std::int64_t>() > last_frame);
        last_frame = s["frame"].get<std::int64_t>();
        ++frames;
    }
    live.channel.client_disconnect();
    live.thread.join();
    CHECK(live.summary.frames_dropped > 0);
    CHECK(live.summary.frames_rendered > static_cast<std::uint64_t>(frames));
    CHECK(last_frame > frames);
}

TEST_CASE("websocket round trip") {
    namespace net = boost::asio;
    namespace websocket = boost::beast::websocket;
    auto scene = std::make_shared<const Scene>(small_scene());
    const auto options = small_options();
    ViewerServer server(scene, options, 0);
    std::thread serve([&] { server.run(); });
    REQUIRE(server.port() != 0);

    net::io_context ioc;
    net::ip::tcp::resolver resolver(ioc);
    websocket::stream<net::ip::tcp::socket> ws(ioc);
    net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
    ws.handshake("127.0.0.1", "/");

    auto read = [&](bool& binary) {
        boost::beast::flat_buffer buf;
        ws.read(buf);
        binary = ws.got_binary();
        return boost::beast::buffers_to_string(buf.data());
    };
    auto send = [&](const std::string& text) {
        ws.text(true);
        ws.write(net::buffer(text));
    };

    send(control_json(msg::Hello{}));
    bool binary = false;
    const auto info = json::parse(read(binary));
    CHECK(!binary);
    CHECK(info["models"].size() == 2);

    for (float yaw : {0.2f, 0.4f, 0.8f}) {
        send(camera_msg(yaw));
    }
    send(control_json(msg::SetTime{0.5f}));
    send(control_json(msg::SetStrategy{SortStrategy::parse("global")}));
    FrameMessage last;
    int frames = 0;
    while (true) {
        const auto payload = read(binary);
        REQUIRE(binary);
        last = decode_frame_message(std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
        ++frames;
        const auto stats = json::parse(read(binary));
        REQUIRE(!binary);
        REQUIRE(stats["type"] == "stats");
        if (stats["seq"] == 6) {
            break;
        }
    }
    CHECK(frames <= 6);
    const Camera cam = session_camera(msg::CameraUpdate{0.8f, 0.2f, 4.5f, Vec3f::Zero(), 0.9f}, options);
    CHECK(frame_pixels(last) == to_rgba8(render_frame(*scene, cam, make_inputs(*scene, cam, 0.5f)).image));

    // malformed input closes with a protocol error
    send("{oops");
    const auto err = json::parse(read(binary));
    CHECK(err["code"] == "protocol");
    boost::beast::error_code ec;
    boost::beast::flat_buffer buf;
    ws.read(buf, ec);
    CHECK(ec == websocket::error::closed);
    CHECK(ws.reason().code == websocket::close_code::protocol_error);

    server.stop();
    serve.join();
}
