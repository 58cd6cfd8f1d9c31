#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nss::service {

struct Event {
    std::uint64_t seq = 0;
    /// "state", "record" or "training".
    std::string type;
    nlohmann::json data;
};

/// One subscriber's bounded queue. When full, the oldest "state" event is
/// dropped first, then the oldest event of any type.
class Subscription {
public:
    explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

    /// Waits up to `timeout`; nullopt on timeout or once closed and drained.
    std::optional<Event> next(std::chrono::milliseconds timeout);
    void close();
    bool closed() const;
    std::uint64_t dropped() const;

private:
    friend class EventBus;
    void push(const Event& e);

    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<Event> queue_;
    std::uint64_t dropped_ = 0;
    bool closed_ = false;
};

/// Fan-out to any number of subscribers. publish never blocks on a consumer.
class EventBus {
public:
    explicit EventBus(std::size_t subscriber_capacity = 1024) : capacity_(subscriber_capacity) {}

    std::shared_ptr<Subscription> subscribe();
    void publish(std::string type, nlohmann::json data);
    /// Closes every subscription; later subscriptions start closed.
    void close();
    std::size_t subscriber_count() const;

private:
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::vector<std::weak_ptr<Subscription>> subscribers_;
    std::uint64_t next_seq_ = 1;
    bool closed_ = false;
};

}  // namespace nss::service
