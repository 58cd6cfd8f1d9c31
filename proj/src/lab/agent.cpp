#include "nss/lab/agent.hpp"

#include "nss/snmp/poller.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace nss::lab {

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

std::uint64_t interface_seed(std::uint64_t seed, int if_index) {
    return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(if_index));
}

}  // namespace

SyntheticAgent::SyntheticAgent(AgentOptions options)
    : options_(std::move(options)), socket_(snmp::UdpSocket::bind(options_.bind)) {
    if (options_.phases.empty()) {
        throw LabError("agent needs at least one scenario");
    }
    for (const auto& p : options_.phases) p.validate();
    if (options_.if_indexes.empty()) {
        throw LabError("agent needs at least one interface");
    }
    if (options_.segment_ms < 1) {
        throw LabError("segment_ms must be >= 1");
    }
    endpoint_ = socket_.local_endpoint();
    cycling_ = options_.cycle;
    const std::int64_t now = options_.clock->now_ms();
    boot_ms_ = now;
    for (int idx : options_.if_indexes) {
        interfaces_.push_back(Interface{idx, CounterModel(options_.phases.front().counter_base), {}, {}});
    }
    enter_phase(0, now);
    thread_ = std::thread([this] { serve(); });
}

SyntheticAgent::~SyntheticAgent() {
    stop();
}

void SyntheticAgent::stop() {
    stop_ = true;
    if (thread_.joinable()) {
        thread_.join();
    }
}

void SyntheticAgent::enter_phase(std::size_t index, std::int64_t start_ms) {
    phase_index_ = index;
    phase_start_ms_ = start_ms;
    segment_start_ms_ = start_ms;
    for (auto& itf : interfaces_) {
        itf.rng.seed(interface_seed(phase().seed, itf.if_index));
    }
    history_.push_back(PhaseRecord{start_ms, phase().kind});
    draw_segment();
}

void SyntheticAgent::draw_segment() {
    const double duration_ms = phase().duration_s * 1000.0;
    const double mid = static_cast<double>(segment_start_ms_ - phase_start_ms_) + options_.segment_ms / 2.0;
    for (auto& itf : interfaces_) {
        itf.rates = draw_rates(phase().params, mid / duration_ms, itf.rng);
    }
}

std::int64_t SyntheticAgent::phase_end_ms() const {
    const bool has_next = cycling_ || phase_index_ + 1 < options_.phases.size();
    return has_next ? phase_start_ms_ + static_cast<std::int64_t>(phase().duration_s) * 1000 : kNever;
}

void SyntheticAgent::advance_to(std::int64_t now_ms) {
    for (;;) {
        const std::int64_t phase_end = phase_end_ms();
        const std::int64_t segment_end = std::min(segment_start_ms_ + options_.segment_ms, phase_end);
        if (segment_end > now_ms) {
            return;
        }
        const double seconds = static_cast<double>(segment_end - segment_start_ms_) / 1000.0;
        for (auto& itf : interfaces_) {
            itf.model.accumulate(itf.rates, seconds);
        }
        segment_start_ms_ = segment_end;
        if (segment_end == phase_end) {
            enter_phase((phase_index_ + 1) % options_.phases.size(), segment_end);
        } else {
            draw_segment();
        }
    }
}

void SyntheticAgent::set_scenario(const Scenario& scenario) {
    scenario.validate();
    std::lock_guard lock(mutex_);
    const std::int64_t now = options_.clock->now_ms();
    advance_to(now);
    for (auto& itf : interfaces_) {
        itf.model.accumulate(itf.rates, static_cast<double>(now - segment_start_ms_) / 1000.0);
    }
    options_.phases = {scenario};
    cycling_ = false;
    enter_phase(0, now);
}

ScenarioKind SyntheticAgent::current_kind() {
    std::lock_guard lock(mutex_);
    advance_to(options_.clock->now_ms());
    return phase().kind;
}

std::optional<ScenarioKind> SyntheticAgent::kind_at(std::int64_t ms) {
    std::lock_guard lock(mutex_);
    advance_to(options_.clock->now_ms());
    std::optional<ScenarioKind> out;
    for (const auto& rec : history_) {
        if (rec.start_ms <= ms) out = rec.kind;
    }
    return out;
}

std::vector<PhaseRecord> SyntheticAgent::phase_history() {
    std::lock_guard lock(mutex_);
    advance_to(options_.clock->now_ms());
    return history_;
}

void SyntheticAgent::reboot_now() {
    std::lock_guard lock(mutex_);
    const std::int64_t now = options_.clock->now_ms();
    advance_to(now);
    for (auto& itf : interfaces_) {
        itf.model.reset();
    }
    segment_start_ms_ = now;
    boot_ms_ = now;
    uptime_base_ticks_ = 0;
}

std::optional<snmp::Message> SyntheticAgent::respond(const snmp::Message& request, std::int64_t now_ms) {
    if (request.community != options_.community || request.pdu.kind == snmp::PduKind::Response) {
        return std::nullopt;
    }
    snmp::Message reply = request;
    reply.pdu.kind = snmp::PduKind::Response;
    reply.pdu.error_status = 0;
    reply.pdu.error_index = 0;
    if (request.pdu.kind == snmp::PduKind::GetNextRequest) {
        reply.pdu.error_status = 5;  // genErr: walking is not supported
        reply.pdu.error_index = request.pdu.varbinds.empty() ? 0 : 1;
        return reply;
    }

    std::lock_guard lock(mutex_);
    advance_to(now_ms);
    const double partial = static_cast<double>(now_ms - segment_start_ms_) / 1000.0;
    const std::int64_t ticks = uptime_base_ticks_ + (now_ms - boot_ms_) / 10;
    const auto if_entry = snmp::counter_column("in_octets")->arcs();
    const std::size_t prefix = if_entry.size() - 1;

    for (auto& vb : reply.pdu.varbinds) {
        vb.value = snmp::NoSuchInstance{};
        if (vb.oid == snmp::sys_uptime_oid()) {
            vb.value = snmp::TimeTicks{static_cast<std::uint32_t>(ticks)};
            continue;
        }
        const auto& arcs = vb.oid.arcs();
        if (arcs.size() != prefix + 2 || !std::equal(if_entry.begin(), if_entry.begin() + prefix, arcs.begin())) {
            continue;
        }
        const auto name = snmp::counter_for_column(arcs[prefix]);
        const auto itf = std::find_if(interfaces_.begin(), interfaces_.end(),
                                      [&](const Interface& i) { return static_cast<std::uint32_t>(i.if_index) == arcs.back(); });
        if (!name || itf == interfaces_.end()) {
            continue;
        }
        vb.value = snmp::Counter32{itf->model.counters(&itf->rates, partial).at(std::string(*name))};
    }
    return reply;
}

void SyntheticAgent::serve() {
    struct Pending {
        std::chrono::steady_clock::time_point due;
        std::vector<std::uint8_t> bytes;
        sockaddr_in to;
    };
    std::deque<Pending> pending;
    while (!stop_) {
        auto wait = std::chrono::milliseconds(20);
        const auto now_real = std::chrono::steady_clock::now();
        while (!pending.empty() && pending.front().due <= now_real) {
            try {
                socket_.send_to(pending.front().bytes, pending.front().to);
                ++replies_sent_;
            } catch (const snmp::TransportError&) {
            }
            pending.pop_front();
        }
        if (!pending.empty()) {
            wait = std::min(wait, std::chrono::ceil<std::chrono::milliseconds>(pending.front().due - now_real));
        }
        auto datagram = socket_.receive(wait);
        if (!datagram) {
            continue;
        }
        ++requests_seen_;
        if (drop_all_) {
            continue;
        }
        snmp::Message request;
        try {
            request = snmp::decode_message(datagram->bytes);
        } catch (const snmp::DecodeError&) {
            continue;
        }
        auto reply = respond(request, options_.clock->now_ms());
        if (!reply) {
            continue;
        }
        auto bytes = snmp::encode_message(*reply);
        const int delay = delay_ms_;
        if (delay <= 0) {
            try {
                socket_.send_to(bytes, datagram->from);
                ++replies_sent_;
            } catch (const snmp::TransportError&) {
            }
        } else {
            pending.push_back(Pending{std::chrono::steady_clock::now() + std::chrono::milliseconds(delay),
                                      std::move(bytes), datagram->from});
        }
    }
}

}  // namespace nss::lab
