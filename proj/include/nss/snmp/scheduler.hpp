#pragma once

#include "nss/common/clock.hpp"
#include "nss/features/pipeline.hpp"
#include "nss/snmp/poller.hpp"
#include "nss/snmp/target.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace nss::snmp {

struct StreamKey {
    std::string target_id;
    int if_index = 0;
    std::string to_string() const { return target_id + "/" + std::to_string(if_index); }
    friend auto operator<=>(const StreamKey&, const StreamKey&) = default;
};

struct SnapshotEvent {
    features::CounterSnapshot snapshot;
};

struct PollFailure {
    StreamKey stream;
    std::int64_t ts_ms = 0;
    /// "unreachable", "snmp_error", "collector_error" or "transport_error".
    std::string kind;
    std::string message;
};

using PollEvent = std::variant<SnapshotEvent, PollFailure>;
using PollSink = std::function<void(const PollEvent&)>;
using PollFn = std::function<features::CounterSnapshot(const Target&, int if_index)>;

PollFn make_snmp_poll_fn(std::shared_ptr<SnmpPoller> poller, PollOptions options = {});

struct SchedulerOptions {
    std::uint64_t seed = 0x5eed;
    std::size_t max_in_flight = 64;
};

/// Due-time bookkeeping for one (target, if_index) stream. Gaps between
/// consecutive due times are interval × U[0.9, 1.1] drawn from a generator
/// seeded by the global seed and the stream key.
class StreamSchedule {
public:
    StreamSchedule(const StreamKey& key, int interval_s, std::uint64_t seed, std::int64_t start_ms);

    std::int64_t due_ms() const { return due_ms_; }
    std::int64_t interval_ms() const { return interval_ms_; }
    /// Moves to the next due time after a dispatch at `dispatched_ms`. If the
    /// stream fell a full interval behind, it re-bases on the dispatch time.
    void advance(std::int64_t dispatched_ms);

private:
    std::int64_t jittered_gap();

    std::int64_t interval_ms_;
    std::mt19937_64 rng_;
    std::int64_t due_ms_;
};

/// Polls every stream on its own jittered cadence. At most one poll per
/// stream is in flight, so events for a stream reach the sink in order.
/// Failures are delivered as PollFailure events and never escape.
class PollScheduler {
public:
    PollScheduler(PollFn poll, PollSink sink, std::shared_ptr<const Clock> clock = system_clock(),
                  SchedulerOptions options = {});
    ~PollScheduler();
    PollScheduler(const PollScheduler&) = delete;
    PollScheduler& operator=(const PollScheduler&) = delete;

    /// Validates and installs a new target set. Streams that keep their key
    /// and interval keep their schedule.
    void set_targets(const std::vector<Target>& targets);
    std::vector<Target> targets() const;
    void start();
    void stop();
    bool running() const;

private:
    struct Stream {
        Target target;
        int if_index;
        StreamSchedule schedule;
        bool in_flight = false;
    };

    void scheduler_loop();
    void worker_loop();
    void run_poll(const StreamKey& key, const Target& target, int if_index);

    PollFn poll_;
    PollSink sink_;
    std::shared_ptr<const Clock> clock_;
    SchedulerOptions options_;

    mutable std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable work_ready_;
    std::vector<Target> targets_;
    std::map<StreamKey, Stream> streams_;
    std::deque<StreamKey> jobs_;
    std::size_t in_flight_ = 0;
    bool stopping_ = false;
    bool running_ = false;
    std::thread scheduler_thread_;
    std::vector<std::thread> workers_;
};

/// Outcome of one simulated poll: success or failure, completing after
/// `latency_ms` of simulated time.
struct SimulatedPoll {
    bool ok = true;
    double latency_ms = 0;
};
using SimulatedPollFn = std::function<SimulatedPoll(const Target&, int if_index, std::int64_t dispatch_ms)>;

struct SimulatedStream {
    StreamKey key;
    std::int64_t interval_ms = 0;
    std::vector<std::int64_t> dispatch_ms;
    std::int64_t snapshots = 0;
    std::int64_t failures = 0;
    std::int64_t max_lateness_ms = 0;
};

struct SimulationReport {
    std::vector<SimulatedStream> streams;
    std::size_t peak_in_flight = 0;
    const SimulatedStream& stream(const std::string& target_id, int if_index) const;
};

/// Discrete-event run of the scheduling policy over [0, duration_ms) of
/// simulated time. Only polls that complete before duration_ms count.
SimulationReport simulate_schedule(const std::vector<Target>& targets, std::int64_t duration_ms,
                                   const SimulatedPollFn& poll, const SchedulerOptions& options = {});

}  // namespace nss::snmp
