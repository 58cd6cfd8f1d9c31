#pragma once

// HTTP/JSON API under /api/v1, the server-sent event stream and the static
// dashboard mount under /ui.

#include "nss/service/service.hpp"

#include <memory>
#include <string>

namespace nss::service {

class ApiServer {
public:
    explicit ApiServer(Service& service);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds `host:port` (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Serves on a background thread.
    void start();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace nss::service
