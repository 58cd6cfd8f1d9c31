#include "nss/snmp/scheduler.hpp"

#include "nss/snmp/transport.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace nss::snmp {

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

PollFailure classify_failure(const StreamKey& key, std::int64_t ts_ms, std::exception_ptr error) {
    PollFailure f{key, ts_ms, "collector_error", ""};
    try {
        std::rethrow_exception(error);
    } catch (const TargetUnreachable& e) {
        f.kind = "unreachable";
        f.message = e.what();
    } catch (const SnmpError& e) {
        f.kind = "snmp_error";
        f.message = e.what();
    } catch (const TransportError& e) {
        f.kind = "transport_error";
        f.message = e.what();
    } catch (const std::exception& e) {
        f.message = e.what();
    } catch (...) {
        f.message = "unknown error";
    }
    return f;
}

}  // namespace

PollFn make_snmp_poll_fn(std::shared_ptr<SnmpPoller> poller, PollOptions options) {
    return [poller = std::move(poller), options](const Target& target, int if_index) {
        return poller->poll_once(target, if_index, options);
    };
}

StreamSchedule::StreamSchedule(const StreamKey& key, int interval_s, std::uint64_t seed, std::int64_t start_ms)
    : interval_ms_(static_cast<std::int64_t>(interval_s) * 1000), rng_(seed ^ fnv1a(key.to_string())) {
    std::uniform_int_distribution<std::int64_t> phase(0, interval_ms_ / 10);
    due_ms_ = start_ms + phase(rng_);
}

std::int64_t StreamSchedule::jittered_gap() {
    std::uniform_int_distribution<std::int64_t> gap(interval_ms_ - interval_ms_ / 10, interval_ms_ + interval_ms_ / 10);
    return gap(rng_);
}

void StreamSchedule::advance(std::int64_t dispatched_ms) {
    const std::int64_t base = dispatched_ms - due_ms_ >= interval_ms_ ? dispatched_ms : due_ms_;
    due_ms_ = base + jittered_gap();
}

PollScheduler::PollScheduler(PollFn poll, PollSink sink, std::shared_ptr<const Clock> clock, SchedulerOptions options)
    : poll_(std::move(poll)), sink_(std::move(sink)), clock_(std::move(clock)), options_(options) {
    if (options_.max_in_flight == 0) {
        throw std::invalid_argument("max_in_flight must be positive");
    }
}

PollScheduler::~PollScheduler() {
    stop();
}

void PollScheduler::set_targets(const std::vector<Target>& targets) {
    for (const auto& t : targets) {
        t.validate();
    }
    std::lock_guard lock(mutex_);
    const std::int64_t now = clock_->now_ms();
    std::map<StreamKey, Stream> next;
    for (const auto& t : targets) {
        for (int idx : t.if_indexes) {
            StreamKey key{t.id, idx};
            auto old = streams_.find(key);
            if (old != streams_.end() && old->second.target.poll_interval_s == t.poll_interval_s) {
                Stream s = old->second;
                s.target = t;
                next.emplace(key, std::move(s));
            } else {
                next.emplace(key, Stream{t, idx, StreamSchedule(key, t.poll_interval_s, options_.seed, now)});
            }
        }
    }
    streams_ = std::move(next);
    targets_ = targets;
    if (running_) {
        const std::size_t want = std::min(options_.max_in_flight, streams_.size());
        while (workers_.size() < want) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }
    wake_.notify_all();
}

std::vector<Target> PollScheduler::targets() const {
    std::lock_guard lock(mutex_);
    return targets_;
}

void PollScheduler::start() {
    std::lock_guard lock(mutex_);
    if (running_) {
        return;
    }
    running_ = true;
    stopping_ = false;
    const std::size_t want = std::min(options_.max_in_flight, std::max<std::size_t>(1, streams_.size()));
    while (workers_.size() < want) {
        workers_.emplace_back([this] { worker_loop(); });
    }
    scheduler_thread_ = std::thread([this] { scheduler_loop(); });
}

void PollScheduler::stop() {
    {
        std::lock_guard lock(mutex_);
        if (!running_) {
            return;
        }
        stopping_ = true;
    }
    wake_.notify_all();
    work_ready_.notify_all();
    if (scheduler_thread_.joinable()) scheduler_thread_.join();
    for (auto& w : workers_) {
        if (w.joinable()) w.join();
    }
    std::lock_guard lock(mutex_);
    workers_.clear();
    jobs_.clear();
    in_flight_ = 0;
    for (auto& [key, s] : streams_) {
        s.in_flight = false;
    }
    running_ = false;
}

bool PollScheduler::running() const {
    std::lock_guard lock(mutex_);
    return running_;
}

void PollScheduler::scheduler_loop() {
    std::unique_lock lock(mutex_);
    while (!stopping_) {
        const std::int64_t now = clock_->now_ms();
        std::vector<Stream*> ready;
        for (auto& [key, s] : streams_) {
            if (!s.in_flight && s.schedule.due_ms() <= now) {
                ready.push_back(&s);
            }
        }
        std::sort(ready.begin(), ready.end(),
                  [](const Stream* a, const Stream* b) { return a->schedule.due_ms() < b->schedule.due_ms(); });
        for (Stream* s : ready) {
            if (in_flight_ >= options_.max_in_flight) {
                break;
            }
            s->in_flight = true;
            s->schedule.advance(now);
            ++in_flight_;
            jobs_.push_back(StreamKey{s->target.id, s->if_index});
        }
        if (!jobs_.empty()) {
            work_ready_.notify_all();
        }

        std::int64_t next_due = now + 1000;
        for (const auto& [key, s] : streams_) {
            if (!s.in_flight) {
                next_due = std::min(next_due, s.schedule.due_ms());
            }
        }
        auto wait = clock_->real_duration(static_cast<double>(std::max<std::int64_t>(1, next_due - now)));
        wait = std::min<std::chrono::nanoseconds>(wait, std::chrono::seconds(1));
        wake_.wait_for(lock, wait);
    }
}

void PollScheduler::worker_loop() {
    std::unique_lock lock(mutex_);
    for (;;) {
        work_ready_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        if (stopping_) {
            return;
        }
        const StreamKey key = jobs_.front();
        jobs_.pop_front();
        auto it = streams_.find(key);
        if (it == streams_.end()) {
            --in_flight_;
            continue;
        }
        const Target target = it->second.target;
        lock.unlock();
        run_poll(key, target, key.if_index);
        lock.lock();
        --in_flight_;
        if (auto done = streams_.find(key); done != streams_.end()) {
            done->second.in_flight = false;
        }
        wake_.notify_all();
    }
}

void PollScheduler::run_poll(const StreamKey& key, const Target& target, int if_index) {
    PollEvent event;
    try {
        event = SnapshotEvent{poll_(target, if_index)};
    } catch (...) {
        event = classify_failure(key, clock_->now_ms(), std::current_exception());
    }
    try {
        sink_(event);
    } catch (...) {
        // A failing sink must not take the scheduler down with it.
    }
}

const SimulatedStream& SimulationReport::stream(const std::string& target_id, int if_index) const {
    for (const auto& s : streams) {
        if (s.key.target_id == target_id && s.key.if_index == if_index) {
            return s;
        }
    }
    throw std::out_of_range("no simulated stream " + target_id + "/" + std::to_string(if_index));
}

SimulationReport simulate_schedule(const std::vector<Target>& targets, std::int64_t duration_ms,
                                   const SimulatedPollFn& poll, const SchedulerOptions& options) {
    struct SimState {
        const Target* target;
        StreamSchedule schedule;
        bool in_flight = false;
        bool ready = false;
    };
    enum class Kind { Complete = 0, Due = 1 };
    // (time, kind, stream index); completions at the same instant go first so
    // freed slots are visible to streams falling due at that instant.
    using Event = std::tuple<std::int64_t, int, std::size_t, bool>;

    if (options.max_in_flight == 0) {
        throw std::invalid_argument("max_in_flight must be positive");
    }
    SimulationReport report;
    std::vector<SimState> states;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    for (const auto& t : targets) {
        t.validate();
        for (int idx : t.if_indexes) {
            StreamKey key{t.id, idx};
            states.push_back(SimState{&t, StreamSchedule(key, t.poll_interval_s, options.seed, 0)});
            SimulatedStream s;
            s.key = key;
            s.interval_ms = states.back().schedule.interval_ms();
            report.streams.push_back(std::move(s));
            events.emplace(states.back().schedule.due_ms(), static_cast<int>(Kind::Due), states.size() - 1, true);
        }
    }

    std::size_t in_flight = 0;
    while (!events.empty()) {
        const auto [now, kind, index, ok] = events.top();
        events.pop();
        if (now >= duration_ms) {
            break;
        }
        auto& st = states[index];
        auto& out = report.streams[index];
        if (kind == static_cast<int>(Kind::Complete)) {
            st.in_flight = false;
            --in_flight;
            ++(ok ? out.snapshots : out.failures);
            if (st.schedule.due_ms() <= now) {
                st.ready = true;
            }
        } else if (!st.in_flight) {
            st.ready = true;
        }

        while (in_flight < options.max_in_flight) {
            std::size_t pick = states.size();
            for (std::size_t i = 0; i < states.size(); ++i) {
                if (states[i].ready && (pick == states.size() ||
                                        states[i].schedule.due_ms() < states[pick].schedule.due_ms())) {
                    pick = i;
                }
            }
            if (pick == states.size()) {
                break;
            }
            auto& s = states[pick];
            auto& rec = report.streams[pick];
            s.ready = false;
            s.in_flight = true;
            ++in_flight;
            report.peak_in_flight = std::max(report.peak_in_flight, in_flight);
            rec.dispatch_ms.push_back(now);
            rec.max_lateness_ms = std::max(rec.max_lateness_ms, now - s.schedule.due_ms());
            const SimulatedPoll result = poll(*s.target, rec.key.if_index, now);
            s.schedule.advance(now);
            const auto latency = static_cast<std::int64_t>(std::max(0.0, result.latency_ms));
            events.emplace(now + latency, static_cast<int>(Kind::Complete), pick, result.ok);
            events.emplace(s.schedule.due_ms(), static_cast<int>(Kind::Due), pick, true);
        }
    }
    return report;
}

}  // namespace nss::snmp
