#pragma once

// SNMP v2c message codec over the BER subset SNMP needs: definite lengths,
// minimal integers, single-byte tags.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nss::snmp {

namespace tag {
inline constexpr std::uint8_t kInteger = 0x02;
inline constexpr std::uint8_t kOctetString = 0x04;
inline constexpr std::uint8_t kNull = 0x05;
inline constexpr std::uint8_t kOid = 0x06;
inline constexpr std::uint8_t kSequence = 0x30;
inline constexpr std::uint8_t kCounter32 = 0x41;
inline constexpr std::uint8_t kGauge32 = 0x42;
inline constexpr std::uint8_t kTimeTicks = 0x43;
inline constexpr std::uint8_t kNoSuchObject = 0x80;
inline constexpr std::uint8_t kNoSuchInstance = 0x81;
inline constexpr std::uint8_t kGetRequest = 0xA0;
inline constexpr std::uint8_t kGetNextRequest = 0xA1;
inline constexpr std::uint8_t kResponse = 0xA2;
}  // namespace tag

inline constexpr std::int32_t kVersion2c = 1;

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DecodeError : public std::runtime_error {
public:
    DecodeError(std::size_t offset, const std::string& reason);
    std::size_t offset() const { return offset_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t offset_;
    std::string reason_;
};

class Oid {
public:
    Oid() = default;
    Oid(std::initializer_list<std::uint32_t> arcs) : arcs_(arcs) {}
    explicit Oid(std::vector<std::uint32_t> arcs) : arcs_(std::move(arcs)) {}

    /// Dotted form, e.g. "1.3.6.1.2.1.1.3.0". Arcs above 2^32-1 are rejected.
    static Oid parse(std::string_view dotted);

    const std::vector<std::uint32_t>& arcs() const { return arcs_; }
    std::size_t size() const { return arcs_.size(); }
    Oid child(std::uint32_t arc) const;
    std::string to_string() const;

    friend bool operator==(const Oid&, const Oid&) = default;
    friend auto operator<=>(const Oid&, const Oid&) = default;

private:
    std::vector<std::uint32_t> arcs_;
};

struct Integer {
    std::int32_t value = 0;
    friend bool operator==(const Integer&, const Integer&) = default;
};
struct OctetString {
    std::string bytes;
    friend bool operator==(const OctetString&, const OctetString&) = default;
};
struct Null {
    friend bool operator==(const Null&, const Null&) = default;
};
struct Counter32 {
    std::uint32_t value = 0;
    friend bool operator==(const Counter32&, const Counter32&) = default;
};
struct Gauge32 {
    std::uint32_t value = 0;
    friend bool operator==(const Gauge32&, const Gauge32&) = default;
};
struct TimeTicks {
    std::uint32_t value = 0;
    friend bool operator==(const TimeTicks&, const TimeTicks&) = default;
};
struct NoSuchObject {
    friend bool operator==(const NoSuchObject&, const NoSuchObject&) = default;
};
struct NoSuchInstance {
    friend bool operator==(const NoSuchInstance&, const NoSuchInstance&) = default;
};
/// A varbind value whose tag this codec does not interpret.
struct Opaque {
    std::uint8_t tag = 0;
    std::vector<std::uint8_t> content;
    friend bool operator==(const Opaque&, const Opaque&) = default;
};

using Value =
    std::variant<Integer, OctetString, Null, Oid, Counter32, Gauge32, TimeTicks, NoSuchObject, NoSuchInstance, Opaque>;

struct VarBind {
    Oid oid;
    Value value;
    friend bool operator==(const VarBind&, const VarBind&) = default;
};

enum class PduKind { GetRequest, GetNextRequest, Response };

struct Pdu {
    PduKind kind = PduKind::GetRequest;
    std::int32_t request_id = 0;
    std::int32_t error_status = 0;
    std::int32_t error_index = 0;
    std::vector<VarBind> varbinds;
    friend bool operator==(const Pdu&, const Pdu&) = default;
};

struct Message {
    std::int32_t version = kVersion2c;
    std::string community;
    Pdu pdu;
    friend bool operator==(const Message&, const Message&) = default;
};

/// Throws EncodeError for OIDs that cannot be encoded (fewer than two arcs,
/// bad leading arcs) and for Opaque values that reuse a known tag.
std::vector<std::uint8_t> encode_message(const Message& message);

/// Strict parse of v2c messages; every failure is a DecodeError carrying the
/// byte offset.
Message decode_message(std::span<const std::uint8_t> bytes);

// Exposed for tests and fixtures.
std::vector<std::uint8_t> encode_value(const Value& value);
std::vector<std::uint8_t> encode_oid(const Oid& oid);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

}  // namespace nss::snmp
