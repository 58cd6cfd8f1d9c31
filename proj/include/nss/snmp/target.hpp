#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace nss::snmp {

inline constexpr int kMinPollIntervalS = 1;
inline constexpr int kMaxPollIntervalS = 300;
inline constexpr int kDefaultPollIntervalS = 10;

struct Target {
    std::string id;
    std::string host;
    std::uint16_t port = 161;
    std::string community = "public";
    std::vector<int> if_indexes;
    int poll_interval_s = kDefaultPollIntervalS;

    /// Throws std::invalid_argument describing the first violated rule.
    void validate() const;

    friend bool operator==(const Target&, const Target&) = default;
};

nlohmann::json to_json(const Target& target);
/// Missing optional fields take their defaults; the result is validated.
Target target_from_json(const nlohmann::json& j);

}  // namespace nss::snmp
