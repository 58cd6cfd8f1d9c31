#pragma once

#include "nss/snmp/ber.hpp"

#include "test_support.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace nss::testing {

inline std::uint32_t random_u32(Rng& rng) {
    // Mix of small, boundary and full-range values.
    switch (rng.below(4)) {
        case 0:
            return static_cast<std::uint32_t>(rng.below(256));
        case 1:
            return std::numeric_limits<std::uint32_t>::max() - static_cast<std::uint32_t>(rng.below(3));
        case 2:
            return 1u << rng.below(32);
        default:
            return static_cast<std::uint32_t>(rng.next());
    }
}

inline std::int32_t random_i32(Rng& rng) { return static_cast<std::int32_t>(random_u32(rng)); }

inline snmp::Oid random_oid(Rng& rng) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<std::uint32_t> arcs(n);
    arcs[0] = static_cast<std::uint32_t>(rng.below(3));
    arcs[1] = arcs[0] < 2 ? static_cast<std::uint32_t>(rng.below(40))
                          : static_cast<std::uint32_t>(rng.below(std::numeric_limits<std::uint32_t>::max() - 80));
    for (std::size_t i = 2; i < n; ++i) arcs[i] = random_u32(rng);
    return snmp::Oid(std::move(arcs));
}

inline snmp::Value random_value(Rng& rng) {
    using namespace snmp;
    switch (rng.below(10)) {
        case 0:
            return Integer{random_i32(rng)};
        case 1: {
            std::string s(rng.below(300), '\0');
            for (auto& c : s) c = static_cast<char>(rng.below(256));
            return OctetString{s};
        }
        case 2:
            return Null{};
        case 3:
            return random_oid(rng);
        case 4:
            return Counter32{random_u32(rng)};
        case 5:
            return Gauge32{random_u32(rng)};
        case 6:
            return TimeTicks{random_u32(rng)};
        case 7:
            return NoSuchObject{};
        case 8:
            return NoSuchInstance{};
        default: {
            static constexpr std::uint8_t tags[] = {0x40, 0x44, 0x46, 0x82, 0x01, 0x09};
            std::vector<std::uint8_t> content(rng.below(20));
            for (auto& b : content) b = static_cast<std::uint8_t>(rng.below(256));
            return Opaque{tags[rng.below(std::size(tags))], content};
        }
    }
}

inline snmp::Message random_message(Rng& rng) {
    using namespace snmp;
    Message m;
    m.version = kVersion2c;
    m.community.resize(rng.below(40));
    for (auto& c : m.community) c = static_cast<char>('a' + rng.below(26));
    m.pdu.kind = static_cast<PduKind>(rng.below(3));
    m.pdu.request_id = random_i32(rng);
    m.pdu.error_status = static_cast<std::int32_t>(rng.below(19));
    m.pdu.error_index = static_cast<std::int32_t>(rng.below(13));
    const std::size_t n = rng.below(13);
    for (std::size_t i = 0; i < n; ++i) m.pdu.varbinds.push_back({random_oid(rng), random_value(rng)});
    return m;
}

struct FrozenVector {
    std::string name;
    std::vector<std::uint8_t> bytes;
    snmp::Message message;
};

inline snmp::Value value_from_fixture(const nlohmann::json& j) {
    using namespace snmp;
    const auto type = j.at("type").get<std::string>();
    if (type == "integer") return Integer{j.at("value").get<std::int32_t>()};
    if (type == "octets") return OctetString{j.at("value").get<std::string>()};
    if (type == "null") return Null{};
    if (type == "oid") return Oid::parse(j.at("value").get<std::string>());
    if (type == "counter32") return Counter32{j.at("value").get<std::uint32_t>()};
    if (type == "gauge32") return Gauge32{j.at("value").get<std::uint32_t>()};
    if (type == "timeticks") return TimeTicks{j.at("value").get<std::uint32_t>()};
    if (type == "nosuchobject") return NoSuchObject{};
    if (type == "nosuchinstance") return NoSuchInstance{};
    if (type == "opaque") return Opaque{j.at("tag").get<std::uint8_t>(), from_hex(j.at("hex").get<std::string>())};
    throw std::runtime_error("unknown fixture type " + type);
}

inline nlohmann::json load_snmp_fixture(const std::string& dir) {
    std::ifstream in(dir + "/snmp_vectors.json");
    if (!in) throw std::runtime_error("missing snmp_vectors.json in " + dir);
    return nlohmann::json::parse(in);
}

inline std::vector<FrozenVector> frozen_vectors(const std::string& dir) {
    using namespace snmp;
    std::vector<FrozenVector> out;
    const auto fixture = load_snmp_fixture(dir);
    for (const auto& v : fixture.at("messages")) {
        FrozenVector f;
        f.name = v.at("name");
        f.bytes = from_hex(v.at("hex").get<std::string>());
        f.message.community = v.at("community");
        const auto pdu = v.at("pdu").get<std::string>();
        f.message.pdu.kind = pdu == "get" ? PduKind::GetRequest
                             : pdu == "getnext" ? PduKind::GetNextRequest
                                                : PduKind::Response;
        f.message.pdu.request_id = v.at("request_id");
        f.message.pdu.error_status = v.at("error_status");
        f.message.pdu.error_index = v.at("error_index");
        for (const auto& vb : v.at("varbinds")) {
            f.message.pdu.varbinds.push_back({Oid::parse(vb.at("oid").get<std::string>()), value_from_fixture(vb)});
        }
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace nss::testing
