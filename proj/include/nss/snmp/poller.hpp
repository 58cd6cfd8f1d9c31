#pragma once

#include "nss/common/clock.hpp"
#include "nss/features/pipeline.hpp"
#include "nss/snmp/ber.hpp"
#include "nss/snmp/target.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace nss::snmp {

class CollectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TargetUnreachable : public CollectorError {
public:
    using CollectorError::CollectorError;
};

class SnmpError : public CollectorError {
public:
    SnmpError(int status, int index);
    int status() const { return status_; }
    int index() const { return index_; }

private:
    int status_;
    int index_;
};

/// sysUpTime.0
const Oid& sys_uptime_oid();
/// ifTable column OID for a counter name, e.g. "in_octets" -> 1.3.6.1.2.1.2.2.1.10.
std::optional<Oid> counter_column(std::string_view counter_name);
/// Counter name for an ifTable column number, or nullopt.
std::optional<std::string_view> counter_for_column(std::uint32_t column);
/// sysUpTime.0 followed by the eight counter OIDs of one interface.
std::vector<Oid> poll_oids(int if_index);

struct PollOptions {
    std::chrono::milliseconds timeout{2000};
    int attempts = 3;
};

class SnmpPoller {
public:
    explicit SnmpPoller(std::shared_ptr<const Clock> clock = system_clock(), std::uint32_t request_id_seed = 1);

    /// One GetRequest for uptime plus the interface counters. Responses with a
    /// foreign request-id are ignored. Counters answered with noSuch* are
    /// left out of the snapshot, which then reports degraded().
    features::CounterSnapshot poll_once(const Target& target, int if_index, const PollOptions& options = {});

private:
    std::int32_t next_request_id();

    std::shared_ptr<const Clock> clock_;
    std::atomic<std::uint32_t> request_id_;
};

}  // namespace nss::snmp
