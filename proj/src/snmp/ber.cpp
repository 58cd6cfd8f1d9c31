#include "nss/snmp/ber.hpp"

#include <charconv>
#include <limits>

namespace nss::snmp {

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_length(Bytes& out, std::size_t length) {
    if (length < 0x80) {
        out.push_back(static_cast<std::uint8_t>(length));
        return;
    }
    std::uint8_t buf[sizeof(std::size_t)];
    int n = 0;
    for (std::size_t v = length; v != 0; v >>= 8) {
        buf[n++] = static_cast<std::uint8_t>(v & 0xFF);
    }
    out.push_back(static_cast<std::uint8_t>(0x80 | n));
    while (n > 0) {
        out.push_back(buf[--n]);
    }
}

void put_tlv(Bytes& out, std::uint8_t tag, std::span<const std::uint8_t> content) {
    out.push_back(tag);
    put_length(out, content.size());
    out.insert(out.end(), content.begin(), content.end());
}

// Minimal two's complement content octets.
Bytes integer_content(std::int64_t value) {
    Bytes out;
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> shift) & 0xFF));
    }
    std::size_t start = 0;
    while (start + 1 < out.size()) {
        const bool redundant_zero = out[start] == 0x00 && (out[start + 1] & 0x80) == 0;
        const bool redundant_ones = out[start] == 0xFF && (out[start + 1] & 0x80) != 0;
        if (!redundant_zero && !redundant_ones) {
            break;
        }
        ++start;
    }
    return Bytes(out.begin() + static_cast<std::ptrdiff_t>(start), out.end());
}

void put_integer(Bytes& out, std::uint8_t tag, std::int64_t value) {
    put_tlv(out, tag, integer_content(value));
}

void put_subid(Bytes& out, std::uint64_t v) {
    std::uint8_t buf[10];
    int n = 0;
    do {
        buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
        v >>= 7;
    } while (v != 0);
    while (n > 1) {
        out.push_back(static_cast<std::uint8_t>(buf[--n] | 0x80));
    }
    out.push_back(buf[0]);
}

Bytes oid_content(const Oid& oid) {
    const auto& arcs = oid.arcs();
    if (arcs.size() < 2) {
        throw EncodeError("OID needs at least two arcs: " + oid.to_string());
    }
    if (arcs[0] > 2 || (arcs[0] < 2 && arcs[1] > 39)) {
        throw EncodeError("invalid leading OID arcs: " + oid.to_string());
    }
    const std::uint64_t first = std::uint64_t{arcs[0]} * 40 + arcs[1];
    if (first > std::numeric_limits<std::uint32_t>::max()) {
        throw EncodeError("OID component overflow: " + oid.to_string());
    }
    Bytes out;
    put_subid(out, first);
    for (std::size_t i = 2; i < arcs.size(); ++i) {
        put_subid(out, arcs[i]);
    }
    return out;
}

bool is_known_value_tag(std::uint8_t t) {
    switch (t) {
        case tag::kInteger:
        case tag::kOctetString:
        case tag::kNull:
        case tag::kOid:
        case tag::kCounter32:
        case tag::kGauge32:
        case tag::kTimeTicks:
        case tag::kNoSuchObject:
        case tag::kNoSuchInstance:
            return true;
        default:
            return false;
    }
}

void put_value(Bytes& out, const Value& value) {
    std::visit(
        [&out](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Integer>) {
                put_integer(out, tag::kInteger, v.value);
            } else if constexpr (std::is_same_v<T, OctetString>) {
                put_tlv(out, tag::kOctetString,
                        std::span(reinterpret_cast<const std::uint8_t*>(v.bytes.data()), v.bytes.size()));
            } else if constexpr (std::is_same_v<T, Null>) {
                put_tlv(out, tag::kNull, {});
            } else if constexpr (std::is_same_v<T, Oid>) {
                put_tlv(out, tag::kOid, oid_content(v));
            } else if constexpr (std::is_same_v<T, Counter32>) {
                put_integer(out, tag::kCounter32, v.value);
            } else if constexpr (std::is_same_v<T, Gauge32>) {
                put_integer(out, tag::kGauge32, v.value);
            } else if constexpr (std::is_same_v<T, TimeTicks>) {
                put_integer(out, tag::kTimeTicks, v.value);
            } else if constexpr (std::is_same_v<T, NoSuchObject>) {
                put_tlv(out, tag::kNoSuchObject, {});
            } else if constexpr (std::is_same_v<T, NoSuchInstance>) {
                put_tlv(out, tag::kNoSuchInstance, {});
            } else {
                if (is_known_value_tag(v.tag) || (v.tag & 0x1F) == 0x1F) {
                    throw EncodeError("opaque value cannot use tag " + std::to_string(v.tag));
                }
                put_tlv(out, v.tag, v.content);
            }
        },
        value);
}

std::uint8_t pdu_tag(PduKind kind) {
    switch (kind) {
        case PduKind::GetRequest:
            return tag::kGetRequest;
        case PduKind::GetNextRequest:
            return tag::kGetNextRequest;
        case PduKind::Response:
            return tag::kResponse;
    }
    throw EncodeError("unknown PDU kind");
}

// Bounds-checked cursor over one TLV region. Offsets are absolute into the
// original message so errors point at the offending byte.
class Reader {
public:
    Reader(std::span<const std::uint8_t> data, std::size_t base) : data_(data), base_(base) {}

    bool done() const { return pos_ == data_.size(); }
    std::size_t offset() const { return base_ + pos_; }

    struct Tlv {
        std::uint8_t tag;
        std::size_t tag_offset;
        std::size_t content_offset;
        std::span<const std::uint8_t> content;

        Reader reader() const { return Reader(content, content_offset); }
    };

    Tlv next() {
        const std::size_t tag_offset = offset();
        if (pos_ >= data_.size()) {
            throw DecodeError(tag_offset, "truncated: expected a tag");
        }
        const std::uint8_t t = data_[pos_++];
        if ((t & 0x1F) == 0x1F) {
            throw DecodeError(tag_offset, "multi-byte tags are not supported");
        }
        const std::size_t length_offset = offset();
        if (pos_ >= data_.size()) {
            throw DecodeError(length_offset, "truncated: expected a length");
        }
        const std::uint8_t first = data_[pos_++];
        std::size_t length = 0;
        if (first < 0x80) {
            length = first;
        } else if (first == 0x80) {
            throw DecodeError(length_offset, "indefinite length is not allowed");
        } else {
            const std::size_t n = first & 0x7F;
            if (n > 4) {
                throw DecodeError(length_offset, "length field too long");
            }
            if (data_.size() - pos_ < n) {
                throw DecodeError(length_offset, "truncated length field");
            }
            if (data_[pos_] == 0) {
                throw DecodeError(length_offset, "non-minimal length encoding");
            }
            for (std::size_t i = 0; i < n; ++i) {
                length = (length << 8) | data_[pos_++];
            }
            if (length < 0x80) {
                throw DecodeError(length_offset, "non-minimal length encoding");
            }
        }
        if (length > data_.size() - pos_) {
            throw DecodeError(length_offset, "truncated: length " + std::to_string(length) + " exceeds " +
                                                 std::to_string(data_.size() - pos_) + " remaining bytes");
        }
        Tlv tlv{t, tag_offset, offset(), data_.subspan(pos_, length)};
        pos_ += length;
        return tlv;
    }

    Tlv expect(std::uint8_t wanted, const char* what) {
        auto tlv = next();
        if (tlv.tag != wanted) {
            throw DecodeError(tlv.tag_offset, std::string("expected ") + what);
        }
        return tlv;
    }

    void expect_end(const char* what) const {
        if (!done()) {
            throw DecodeError(offset(), std::string("trailing bytes ") + what);
        }
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

void check_minimal(const Reader::Tlv& tlv) {
    const auto c = tlv.content;
    if (c.empty()) {
        throw DecodeError(tlv.content_offset, "empty integer");
    }
    if (c.size() > 1 && ((c[0] == 0x00 && (c[1] & 0x80) == 0) || (c[0] == 0xFF && (c[1] & 0x80) != 0))) {
        throw DecodeError(tlv.content_offset, "non-minimal integer encoding");
    }
}

std::int32_t read_int32(const Reader::Tlv& tlv) {
    check_minimal(tlv);
    if (tlv.content.size() > 4) {
        throw DecodeError(tlv.content_offset, "integer out of 32-bit range");
    }
    std::int64_t v = (tlv.content[0] & 0x80) ? -1 : 0;
    for (auto b : tlv.content) {
        v = static_cast<std::int64_t>((static_cast<std::uint64_t>(v) << 8) | b);
    }
    return static_cast<std::int32_t>(v);
}

std::uint32_t read_uint32(const Reader::Tlv& tlv) {
    check_minimal(tlv);
    if (tlv.content[0] & 0x80) {
        throw DecodeError(tlv.content_offset, "negative value for an unsigned type");
    }
    if (tlv.content.size() > 5 || (tlv.content.size() == 5 && tlv.content[0] != 0)) {
        throw DecodeError(tlv.content_offset, "unsigned value out of 32-bit range");
    }
    std::uint64_t v = 0;
    for (auto b : tlv.content) {
        v = (v << 8) | b;
    }
    return static_cast<std::uint32_t>(v);
}

Oid read_oid(const Reader::Tlv& tlv) {
    const auto c = tlv.content;
    if (c.empty()) {
        throw DecodeError(tlv.content_offset, "empty OID");
    }
    std::vector<std::uint32_t> arcs;
    std::size_t i = 0;
    while (i < c.size()) {
        const std::size_t start = i;
        if (c[i] == 0x80) {
            throw DecodeError(tlv.content_offset + i, "non-minimal OID sub-identifier");
        }
        std::uint64_t v = 0;
        for (;;) {
            if (i >= c.size()) {
                throw DecodeError(tlv.content_offset + start, "truncated OID sub-identifier");
            }
            const auto b = c[i++];
            v = (v << 7) | (b & 0x7F);
            if (v > std::numeric_limits<std::uint32_t>::max()) {
                throw DecodeError(tlv.content_offset + start, "OID sub-identifier overflow");
            }
            if ((b & 0x80) == 0) {
                break;
            }
        }
        if (arcs.empty()) {
            if (v < 40) {
                arcs.push_back(0);
                arcs.push_back(static_cast<std::uint32_t>(v));
            } else if (v < 80) {
                arcs.push_back(1);
                arcs.push_back(static_cast<std::uint32_t>(v - 40));
            } else {
                arcs.push_back(2);
                arcs.push_back(static_cast<std::uint32_t>(v - 80));
            }
        } else {
            arcs.push_back(static_cast<std::uint32_t>(v));
        }
    }
    return Oid(std::move(arcs));
}

void expect_empty(const Reader::Tlv& tlv, const char* what) {
    if (!tlv.content.empty()) {
        throw DecodeError(tlv.content_offset, std::string(what) + " must have empty content");
    }
}

Value read_value(const Reader::Tlv& tlv) {
    switch (tlv.tag) {
        case tag::kInteger:
            return Integer{read_int32(tlv)};
        case tag::kOctetString:
            return OctetString{std::string(tlv.content.begin(), tlv.content.end())};
        case tag::kNull:
            expect_empty(tlv, "NULL");
            return Null{};
        case tag::kOid:
            return read_oid(tlv);
        case tag::kCounter32:
            return Counter32{read_uint32(tlv)};
        case tag::kGauge32:
            return Gauge32{read_uint32(tlv)};
        case tag::kTimeTicks:
            return TimeTicks{read_uint32(tlv)};
        case tag::kNoSuchObject:
            expect_empty(tlv, "noSuchObject");
            return NoSuchObject{};
        case tag::kNoSuchInstance:
            expect_empty(tlv, "noSuchInstance");
            return NoSuchInstance{};
        default:
            return Opaque{tlv.tag, std::vector<std::uint8_t>(tlv.content.begin(), tlv.content.end())};
    }
}

}  // namespace

DecodeError::DecodeError(std::size_t offset, const std::string& reason)
    : std::runtime_error("decode error at offset " + std::to_string(offset) + ": " + reason),
      offset_(offset),
      reason_(reason) {}

Oid Oid::parse(std::string_view dotted) {
    std::vector<std::uint32_t> arcs;
    std::size_t pos = 0;
    if (!dotted.empty() && dotted.front() == '.') {
        pos = 1;
    }
    while (pos <= dotted.size()) {
        const auto end = std::min(dotted.find('.', pos), dotted.size());
        const auto part = dotted.substr(pos, end - pos);
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
            throw EncodeError("malformed OID: " + std::string(dotted));
        }
        if (v > std::numeric_limits<std::uint32_t>::max()) {
            throw EncodeError("OID component overflow: " + std::string(dotted));
        }
        arcs.push_back(static_cast<std::uint32_t>(v));
        pos = end + 1;
    }
    return Oid(std::move(arcs));
}

Oid Oid::child(std::uint32_t arc) const {
    auto arcs = arcs_;
    arcs.push_back(arc);
    return Oid(std::move(arcs));
}

std::string Oid::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < arcs_.size(); ++i) {
        if (i) out += '.';
        out += std::to_string(arcs_[i]);
    }
    return out;
}

std::vector<std::uint8_t> encode_value(const Value& value) {
    Bytes out;
    put_value(out, value);
    return out;
}

std::vector<std::uint8_t> encode_oid(const Oid& oid) {
    Bytes out;
    put_tlv(out, tag::kOid, oid_content(oid));
    return out;
}

std::vector<std::uint8_t> encode_message(const Message& message) {
    if (message.version != kVersion2c) {
        throw EncodeError("unsupported version " + std::to_string(message.version));
    }
    Bytes varbinds;
    for (const auto& vb : message.pdu.varbinds) {
        Bytes pair;
        put_tlv(pair, tag::kOid, oid_content(vb.oid));
        put_value(pair, vb.value);
        put_tlv(varbinds, tag::kSequence, pair);
    }

    Bytes pdu;
    put_integer(pdu, tag::kInteger, message.pdu.request_id);
    put_integer(pdu, tag::kInteger, message.pdu.error_status);
    put_integer(pdu, tag::kInteger, message.pdu.error_index);
    put_tlv(pdu, tag::kSequence, varbinds);

    Bytes body;
    put_integer(body, tag::kInteger, message.version);
    put_tlv(body, tag::kOctetString,
            std::span(reinterpret_cast<const std::uint8_t*>(message.community.data()), message.community.size()));
    put_tlv(body, pdu_tag(message.pdu.kind), pdu);

    Bytes out;
    put_tlv(out, tag::kSequence, body);
    return out;
}

Message decode_message(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        throw DecodeError(0, "empty input");
    }
    Reader top(bytes, 0);
    const auto outer = top.expect(tag::kSequence, "message SEQUENCE");
    top.expect_end("after message");

    Message message;
    auto body = outer.reader();
    const auto version = body.expect(tag::kInteger, "version INTEGER");
    message.version = read_int32(version);
    if (message.version != kVersion2c) {
        throw DecodeError(version.content_offset, "unsupported version " + std::to_string(message.version));
    }
    const auto community = body.expect(tag::kOctetString, "community OCTET STRING");
    message.community.assign(community.content.begin(), community.content.end());

    const auto pdu_tlv = body.next();
    switch (pdu_tlv.tag) {
        case tag::kGetRequest:
            message.pdu.kind = PduKind::GetRequest;
            break;
        case tag::kGetNextRequest:
            message.pdu.kind = PduKind::GetNextRequest;
            break;
        case tag::kResponse:
            message.pdu.kind = PduKind::Response;
            break;
        default:
            throw DecodeError(pdu_tlv.tag_offset, "unsupported PDU type");
    }
    body.expect_end("after PDU");

    auto pdu = pdu_tlv.reader();
    message.pdu.request_id = read_int32(pdu.expect(tag::kInteger, "request-id INTEGER"));
    message.pdu.error_status = read_int32(pdu.expect(tag::kInteger, "error-status INTEGER"));
    message.pdu.error_index = read_int32(pdu.expect(tag::kInteger, "error-index INTEGER"));
    auto list = pdu.expect(tag::kSequence, "varbind list SEQUENCE").reader();
    pdu.expect_end("after varbind list");

    while (!list.done()) {
        auto pair = list.expect(tag::kSequence, "varbind SEQUENCE").reader();
        VarBind vb;
        vb.oid = read_oid(pair.expect(tag::kOid, "varbind OID"));
        vb.value = read_value(pair.next());
        pair.expect_end("after varbind value");
        message.pdu.varbinds.push_back(std::move(vb));
    }
    return message;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xF];
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<std::uint8_t> out;
    int hi = -1;
    for (char c : hex) {
        if (c == ' ' || c == ':') continue;
        const int n = nibble(c);
        if (n < 0) {
            throw std::invalid_argument("invalid hex digit");
        }
        if (hi < 0) {
            hi = n;
        } else {
            out.push_back(static_cast<std::uint8_t>(hi << 4 | n));
            hi = -1;
        }
    }
    if (hi >= 0) {
        throw std::invalid_argument("odd number of hex digits");
    }
    return out;
}

}  // namespace nss::snmp
