#include "nss/snmp/transport.hpp"

#include <cerrno>
#include <cstring>

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

namespace nss::snmp {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw TransportError(what + ": " + std::strerror(errno));
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw TransportError("expected host:port, got '" + text + "'");
    }
    Endpoint e;
    e.host = text.substr(0, colon);
    try {
        std::size_t used = 0;
        const int port = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1 || port < 0 || port > 65535) {
            throw std::out_of_range("port");
        }
        e.port = static_cast<std::uint16_t>(port);
    } catch (const std::exception&) {
        throw TransportError("bad port in '" + text + "'");
    }
    return e;
}

std::string Endpoint::to_string() const {
    return host + ":" + std::to_string(port);
}

sockaddr_in resolve_ipv4(const Endpoint& endpoint) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(endpoint.port);
    if (inet_pton(AF_INET, endpoint.host.c_str(), &addr.sin_addr) == 1) {
        return addr;
    }
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(endpoint.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        throw TransportError("cannot resolve host '" + endpoint.host + "'");
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    freeaddrinfo(res);
    return addr;
}

UdpSocket::UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0)) {
    if (fd_ < 0) {
        fail("socket");
    }
}

UdpSocket UdpSocket::bind(const Endpoint& local) {
    UdpSocket s;
    const auto addr = resolve_ipv4(local);
    if (::bind(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        fail("bind " + local.to_string());
    }
    return s;
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) {
    other.fd_ = -1;
}

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

UdpSocket::~UdpSocket() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

Endpoint UdpSocket::local_endpoint() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        fail("getsockname");
    }
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof(buf));
    return Endpoint{buf, ntohs(addr.sin_port)};
}

void UdpSocket::send_to(std::span<const std::uint8_t> bytes, const Endpoint& remote) const {
    send_to(bytes, resolve_ipv4(remote));
}

void UdpSocket::send_to(std::span<const std::uint8_t> bytes, const sockaddr_in& remote) const {
    const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&remote),
                            sizeof(remote));
    if (n < 0 || static_cast<std::size_t>(n) != bytes.size()) {
        fail("sendto");
    }
}

std::optional<Datagram> UdpSocket::receive(std::chrono::milliseconds timeout) const {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        pollfd pfd{fd_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(std::max<std::int64_t>(0, left.count())));
        if (rc < 0) {
            if (errno == EINTR) continue;
            fail("poll");
        }
        if (rc == 0) {
            return std::nullopt;
        }
        Datagram d;
        d.bytes.resize(65536);
        socklen_t len = sizeof(d.from);
        const auto n = ::recvfrom(fd_, d.bytes.data(), d.bytes.size(), 0, reinterpret_cast<sockaddr*>(&d.from), &len);
        if (n < 0) {
            // ICMP port-unreachable surfaces here as ECONNREFUSED; keep waiting.
            if (errno == EINTR || errno == ECONNREFUSED) continue;
            fail("recvfrom");
        }
        d.bytes.resize(static_cast<std::size_t>(n));
        return d;
    }
}

}  // namespace nss::snmp
