#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "hsplat/session.hpp"

namespace hsplat {

// WebSocket front end: one session (reader, render and writer threads) per
// connection, all sharing the immutable scene.
class ViewerServer {
public:
    // Port 0 picks a free port; see port().
    ViewerServer(std::shared_ptr<const Scene> scene, SessionOptions options, std::uint16_t port,
                 const std::string& address = "127.0.0.1");
    ~ViewerServer();
    ViewerServer(const ViewerServer&) = delete;
    ViewerServer& operator=(const ViewerServer&) = delete;

    std::uint16_t port() const;
    // Blocks until stop().
    void run();
    // Thread-safe; closes the listener and every open connection.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hsplat
