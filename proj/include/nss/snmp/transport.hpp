#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <netinet/in.h>

namespace nss::snmp {

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    /// "host:port"; IPv4 literals or resolvable names.
    static Endpoint parse(const std::string& text);
    std::string to_string() const;
};

struct Datagram {
    std::vector<std::uint8_t> bytes;
    sockaddr_in from{};
};

/// IPv4 UDP socket, closed on destruction.
class UdpSocket {
public:
    /// Unbound socket; the kernel picks an ephemeral port on first send.
    UdpSocket();
    static UdpSocket bind(const Endpoint& local);

    UdpSocket(UdpSocket&& other) noexcept;
    UdpSocket& operator=(UdpSocket&& other) noexcept;
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;
    ~UdpSocket();

    Endpoint local_endpoint() const;
    void send_to(std::span<const std::uint8_t> bytes, const Endpoint& remote) const;
    void send_to(std::span<const std::uint8_t> bytes, const sockaddr_in& remote) const;
    /// Waits up to `timeout` for one datagram.
    std::optional<Datagram> receive(std::chrono::milliseconds timeout) const;

private:
    explicit UdpSocket(int fd) : fd_(fd) {}
    int fd_ = -1;
};

sockaddr_in resolve_ipv4(const Endpoint& endpoint);

}  // namespace nss::snmp
