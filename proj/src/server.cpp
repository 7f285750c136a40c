#include "hsplat/server.hpp"

#include <future>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "hsplat/error.hpp"

namespace hsplat {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class WebSocketChannel final : public MessageChannel {
public:
    WebSocketChannel(net::io_context& ioc, websocket::stream<tcp::socket>& ws) : ioc_(ioc), ws_(ws) {}

    void start() {
        net::post(ioc_, [this] { read_next(); });
    }

    std::optional<ChannelMessage> receive() override {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return !inbox_.empty() || closed_; });
        if (inbox_.empty()) {
            return std::nullopt;
        }
        auto m = std::move(inbox_.front());
        inbox_.pop_front();
        return m;
    }

    void send_text(const std::string& text) override { write(false, std::make_shared<std::string>(text)); }

    void send_binary(std::span<const std::uint8_t> bytes) override {
        write(true, std::make_shared<std::string>(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }

    void close(std::uint16_t code, const std::string& reason) override {
        std::promise<void> done;
        net::post(ioc_, [&] {
            ws_.async_close(websocket::close_reason(static_cast<websocket::close_code>(code), reason), [&](beast::error_code) { done.set_value(); });
        });
        done.get_future().wait();
    }

    // Forces receive() to return nullopt; used on server shutdown.
    void shutdown() {
        net::post(ioc_, [this] {
            beast::error_code ec;
            beast::get_lowest_layer(ws_).close(ec);
        });
    }

private:
    void read_next() {
        ws_.async_read(buffer_, [this](beast::error_code ec, std::size_t) {
            std::lock_guard lock(mutex_);
            if (ec) {
                closed_ = true;
                cv_.notify_all();
                return;
            }
            inbox_.push_back({ws_.got_binary(), beast::buffers_to_string(buffer_.data())});
            buffer_.consume(buffer_.size());
            cv_.notify_all();
            read_next();
        });
    }

    void write(bool binary, std::shared_ptr<std::string> data) {
        {
            std::lock_guard lock(mutex_);
            if (closed_) {
                return;
            }
        }
        std::promise<void> done;
        net::post(ioc_, [&, data] {
            ws_.binary(binary);
            ws_.async_write(net::buffer(*data), [&, data](beast::error_code, std::size_t) { done.set_value(); });
        });
        done.get_future().wait();
    }

    net::io_context& ioc_;
    websocket::stream<tcp::socket>& ws_;
    beast::flat_buffer buffer_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<ChannelMessage> inbox_;
    bool closed_ = false;
};

}  // namespace

struct ViewerServer::Impl {
    std::shared_ptr<const Scene> scene;
    SessionOptions options;
    net::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::uint16_t port = 0;

    std::mutex mutex;
    std::list<std::thread> connections;
    std::list<WebSocketChannel*> channels;
    bool stopping = false;

    void accept_next() {
        auto ctx = std::make_shared<net::io_context>();
        acceptor.async_accept(*ctx, [this, ctx](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                return;
            }
            {
                std::lock_guard lock(mutex);
                if (stopping) {
                    return;
                }
                connections.emplace_back([this, ctx, s = std::move(socket)]() mutable { serve(ctx, std::move(s)); });
            }
            accept_next();
        });
    }

    void serve(const std::shared_ptr<net::io_context>& ctx, tcp::socket socket) {
        websocket::stream<tcp::socket> ws(std::move(socket));
        try {
            ws.read_message_max(1u << 20);
            ws.accept();
        } catch (const beast::system_error&) {
            return;
        }
        WebSocketChannel channel(*ctx, ws);
        auto guard = net::make_work_guard(*ctx);
        std::thread io([ctx] { ctx->run(); });
        {
            std::lock_guard lock(mutex);
            channels.push_back(&channel);
            if (stopping) {
                channel.shutdown();
            }
        }
        channel.start();
        run_session(*scene, channel, options);
        {
            std::lock_guard lock(mutex);
            channels.remove(&channel);
        }
        channel.shutdown();
        guard.reset();
        ctx->stop();
        io.join();
    }
};

ViewerServer::ViewerServer(std::shared_ptr<const Scene> scene, SessionOptions options, std::uint16_t port,
                           const std::string& address)
    : impl_(std::make_unique<Impl>()) {
    impl_->scene = std::move(scene);
    impl_->options = options;
    try {
        const tcp::endpoint endpoint(net::ip::make_address(address), port);
        impl_->acceptor.open(endpoint.protocol());
        impl_->acceptor.set_option(net::socket_base::reuse_address(true));
        impl_->acceptor.bind(endpoint);
        impl_->acceptor.listen();
        impl_->port = impl_->acceptor.local_endpoint().port();
    } catch (const boost::system::system_error& e) {
        throw Error(ErrorCode::io, "cannot listen on " + address + ":" + std::to_string(port) + ": " + e.what());
    }
    impl_->accept_next();
}

ViewerServer::~ViewerServer() { stop(); }

std::uint16_t ViewerServer::port() const { return impl_->port; }

void ViewerServer::run() { impl_->ioc.run(); }

void ViewerServer::stop() {
    std::list<std::thread> threads;
    {
        std::lock_guard lock(impl_->mutex);
        impl_->stopping = true;
        for (auto* ch : impl_->channels) {
            ch->shutdown();
        }
    }
    net::post(impl_->ioc, [this] {
        beast::error_code ec;
        impl_->acceptor.close(ec);
    });
    impl_->ioc.stop();
    {
        std::lock_guard lock(impl_->mutex);
        threads.swap(impl_->connections);
    }
    for (auto& t : threads) {
        if (t.joinable()) {
            t.join();
        }
    }
}

}  // namespace hsplat
