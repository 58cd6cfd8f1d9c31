#include "nss/snmp/target.hpp"

namespace nss::snmp {

void Target::validate() const {
    if (id.empty()) {
        throw std::invalid_argument("target id must not be empty");
    }
    if (host.empty()) {
        throw std::invalid_argument("target " + id + ": host must not be empty");
    }
    if (port == 0) {
        throw std::invalid_argument("target " + id + ": port must be non-zero");
    }
    if (if_indexes.empty()) {
        throw std::invalid_argument("target " + id + ": if_indexes must not be empty");
    }
    for (int idx : if_indexes) {
        if (idx < 0) {
            throw std::invalid_argument("target " + id + ": if_index " + std::to_string(idx) + " is negative");
        }
    }
    if (poll_interval_s < kMinPollIntervalS || poll_interval_s > kMaxPollIntervalS) {
        throw std::invalid_argument("target " + id + ": poll_interval_s " + std::to_string(poll_interval_s) +
                                    " outside [" + std::to_string(kMinPollIntervalS) + ", " +
                                    std::to_string(kMaxPollIntervalS) + "]");
    }
}

nlohmann::json to_json(const Target& target) {
    return nlohmann::json{
        {"id", target.id},
        {"host", target.host},
        {"port", target.port},
        {"community", target.community},
        {"if_indexes", target.if_indexes},
        {"poll_interval_s", target.poll_interval_s},
    };
}

Target target_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw std::invalid_argument("target must be a JSON object");
    }
    Target t;
    try {
        t.id = j.at("id").get<std::string>();
        t.host = j.at("host").get<std::string>();
        if (j.contains("port")) {
            const int port = j.at("port").get<int>();
            if (port <= 0 || port > 65535) {
                throw std::invalid_argument("target " + t.id + ": port out of range");
            }
            t.port = static_cast<std::uint16_t>(port);
        }
        if (j.contains("community")) t.community = j.at("community").get<std::string>();
        t.if_indexes = j.at("if_indexes").get<std::vector<int>>();
        if (j.contains("poll_interval_s")) t.poll_interval_s = j.at("poll_interval_s").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("invalid target: ") + e.what());
    }
    t.validate();
    return t;
}

}  // namespace nss::snmp
