#pragma once

#include "nss/common/clock.hpp"
#include "nss/lab/counter_model.hpp"
#include "nss/lab/scenario.hpp"
#include "nss/snmp/ber.hpp"
#include "nss/snmp/transport.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace nss::lab {

struct AgentOptions {
    snmp::Endpoint bind{"127.0.0.1", 0};
    std::string community = "public";
    /// Played in order; each phase lasts its duration_s of scenario time.
    std::vector<Scenario> phases;
    /// Restart from the first phase after the last; otherwise stay on the last.
    bool cycle = false;
    std::vector<int> if_indexes{1};
    /// Length of one jitter segment in scenario time.
    int segment_ms = 1000;
    std::shared_ptr<const Clock> clock = system_clock();
};

struct PhaseRecord {
    std::int64_t start_ms = 0;
    ScenarioKind kind = ScenarioKind::Normal;
};

/// Answers SNMP v2c GetRequests for sysUpTime.0 and the eight ifTable
/// counters of its interfaces, with values driven by the scenario clock.
/// Other OIDs come back as noSuchInstance; requests with a different
/// community are dropped.
class SyntheticAgent {
public:
    explicit SyntheticAgent(AgentOptions options);
    ~SyntheticAgent();
    SyntheticAgent(const SyntheticAgent&) = delete;
    SyntheticAgent& operator=(const SyntheticAgent&) = delete;

    snmp::Endpoint endpoint() const { return endpoint_; }

    /// Switches every interface to `scenario` now and stops phase cycling.
    void set_scenario(const Scenario& scenario);
    ScenarioKind current_kind();
    /// Phase that was active at scenario time `ms`, if the agent was running.
    std::optional<ScenarioKind> kind_at(std::int64_t ms);
    std::vector<PhaseRecord> phase_history();

    void set_drop_all(bool drop) { drop_all_ = drop; }
    /// Real-time delay before each reply.
    void set_delay_ms(int delay_ms) { delay_ms_ = delay_ms; }
    /// Uptime and counters restart from zero.
    void reboot_now();

    /// Builds the reply for one request at scenario time `now_ms`, or nullopt
    /// when the request is not answered.
    std::optional<snmp::Message> respond(const snmp::Message& request, std::int64_t now_ms);

    std::uint64_t requests_seen() const { return requests_seen_; }
    std::uint64_t replies_sent() const { return replies_sent_; }
    void stop();

private:
    struct Interface {
        int if_index;
        CounterModel model;
        std::mt19937_64 rng;
        SegmentRates rates;
    };

    void serve();
    void advance_to(std::int64_t now_ms);
    void enter_phase(std::size_t index, std::int64_t start_ms);
    void draw_segment();
    std::int64_t phase_end_ms() const;
    const Scenario& phase() const { return options_.phases[phase_index_]; }

    AgentOptions options_;
    snmp::UdpSocket socket_;
    snmp::Endpoint endpoint_;

    std::mutex mutex_;
    std::vector<Interface> interfaces_;
    std::size_t phase_index_ = 0;
    std::int64_t phase_start_ms_ = 0;
    std::int64_t segment_start_ms_ = 0;
    std::int64_t boot_ms_ = 0;
    std::int64_t uptime_base_ticks_ = kInitialUptimeTicks;
    bool cycling_ = false;
    std::vector<PhaseRecord> history_;

    std::atomic<bool> drop_all_{false};
    std::atomic<int> delay_ms_{0};
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> requests_seen_{0};
    std::atomic<std::uint64_t> replies_sent_{0};
    std::thread thread_;
};

}  // namespace nss::lab
