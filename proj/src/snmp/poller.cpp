#include "nss/snmp/poller.hpp"

#include "nss/snmp/transport.hpp"

#include <array>
#include <utility>

namespace nss::snmp {

namespace {

// ifTable columns in the order the counters are requested.
constexpr std::array<std::pair<std::uint32_t, std::string_view>, 8> kColumns = {{
    {10, "in_octets"},
    {16, "out_octets"},
    {14, "in_errors"},
    {20, "out_errors"},
    {13, "in_discards"},
    {19, "out_discards"},
    {12, "in_nucast_pkts"},
    {11, "in_ucast_pkts"},
}};

const Oid& if_entry_oid() {
    static const Oid oid{1, 3, 6, 1, 2, 1, 2, 2, 1};
    return oid;
}

std::string describe_status(int status) {
    static constexpr std::array<const char*, 19> names = {
        "noError",    "tooBig",        "noSuchName",          "badValue",          "readOnly",
        "genErr",     "noAccess",      "wrongType",           "wrongLength",       "wrongEncoding",
        "wrongValue", "noCreation",    "inconsistentValue",   "resourceUnavailable", "commitFailed",
        "undoFailed", "authorizationError", "notWritable",    "inconsistentName",
    };
    if (status >= 0 && static_cast<std::size_t>(status) < names.size()) {
        return names[static_cast<std::size_t>(status)];
    }
    return "status " + std::to_string(status);
}

std::optional<std::uint32_t> counter_value(const Value& v) {
    if (const auto* c = std::get_if<Counter32>(&v)) return c->value;
    if (const auto* g = std::get_if<Gauge32>(&v)) return g->value;
    return std::nullopt;
}

}  // namespace

SnmpError::SnmpError(int status, int index)
    : CollectorError("agent returned " + describe_status(status) + " at varbind " + std::to_string(index)),
      status_(status),
      index_(index) {}

const Oid& sys_uptime_oid() {
    static const Oid oid{1, 3, 6, 1, 2, 1, 1, 3, 0};
    return oid;
}

std::optional<Oid> counter_column(std::string_view counter_name) {
    for (const auto& [column, name] : kColumns) {
        if (name == counter_name) {
            return if_entry_oid().child(column);
        }
    }
    return std::nullopt;
}

std::optional<std::string_view> counter_for_column(std::uint32_t column) {
    for (const auto& [c, name] : kColumns) {
        if (c == column) {
            return name;
        }
    }
    return std::nullopt;
}

std::vector<Oid> poll_oids(int if_index) {
    std::vector<Oid> out{sys_uptime_oid()};
    for (const auto& [column, name] : kColumns) {
        out.push_back(if_entry_oid().child(column).child(static_cast<std::uint32_t>(if_index)));
    }
    return out;
}

SnmpPoller::SnmpPoller(std::shared_ptr<const Clock> clock, std::uint32_t request_id_seed)
    : clock_(std::move(clock)), request_id_(request_id_seed) {}

std::int32_t SnmpPoller::next_request_id() {
    // Stay positive; some agents mishandle negative request ids.
    return static_cast<std::int32_t>(request_id_.fetch_add(1) & 0x7FFFFFFF);
}

features::CounterSnapshot SnmpPoller::poll_once(const Target& target, int if_index, const PollOptions& options) {
    const auto remote = resolve_ipv4(Endpoint{target.host, target.port});
    UdpSocket socket;

    Message request;
    request.community = target.community;
    request.pdu.kind = PduKind::GetRequest;
    for (auto& oid : poll_oids(if_index)) {
        request.pdu.varbinds.push_back({std::move(oid), Null{}});
    }

    for (int attempt = 0; attempt < options.attempts; ++attempt) {
        request.pdu.request_id = next_request_id();
        const auto wire = encode_message(request);
        const std::int64_t sent_at = clock_->now_ms();
        socket.send_to(wire, remote);

        const auto deadline = std::chrono::steady_clock::now() + options.timeout;
        for (;;) {
            const auto left =
                std::chrono::ceil<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                break;
            }
            auto datagram = socket.receive(left);
            if (!datagram) {
                break;
            }
            Message response;
            try {
                response = decode_message(datagram->bytes);
            } catch (const DecodeError&) {
                continue;
            }
            if (response.pdu.kind != PduKind::Response || response.pdu.request_id != request.pdu.request_id) {
                continue;
            }
            if (response.pdu.error_status != 0) {
                throw SnmpError(response.pdu.error_status, response.pdu.error_index);
            }

            features::CounterSnapshot snapshot;
            snapshot.target_id = target.id;
            snapshot.if_index = if_index;
            snapshot.ts_ms = sent_at;
            bool have_uptime = false;
            const auto& prefix = if_entry_oid().arcs();
            for (const auto& vb : response.pdu.varbinds) {
                if (vb.oid == sys_uptime_oid()) {
                    if (const auto* ticks = std::get_if<TimeTicks>(&vb.value)) {
                        snapshot.uptime_ticks = ticks->value;
                        have_uptime = true;
                    }
                    continue;
                }
                const auto& arcs = vb.oid.arcs();
                if (arcs.size() != prefix.size() + 2 || !std::equal(prefix.begin(), prefix.end(), arcs.begin()) ||
                    arcs.back() != static_cast<std::uint32_t>(if_index)) {
                    continue;
                }
                const auto name = counter_for_column(arcs[prefix.size()]);
                const auto value = counter_value(vb.value);
                if (name && value) {
                    snapshot.counters.emplace(std::string(*name), *value);
                }
            }
            if (!have_uptime) {
                throw CollectorError("agent " + target.id + " did not report sysUpTime");
            }
            return snapshot;
        }
    }
    throw TargetUnreachable("no response from " + target.id + " (" + target.host + ":" +
                            std::to_string(target.port) + ") after " + std::to_string(options.attempts) +
                            " attempts");
}

}  // namespace nss::snmp
