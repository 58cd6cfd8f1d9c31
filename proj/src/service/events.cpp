#include "nss/service/events.hpp"

#include <algorithm>

namespace nss::service {

std::optional<Event> Subscription::next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    ready_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_; });
    if (queue_.empty()) {
        return std::nullopt;
    }
    Event e = std::move(queue_.front());
    queue_.pop_front();
    return e;
}

void Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

bool Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::uint64_t Subscription::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

void Subscription::push(const Event& e) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        if (queue_.size() >= capacity_) {
            const auto state = std::find_if(queue_.begin(), queue_.end(), [](const Event& q) { return q.type == "state"; });
            queue_.erase(state != queue_.end() ? state : queue_.begin());
            ++dropped_;
        }
        queue_.push_back(e);
    }
    ready_.notify_one();
}

std::shared_ptr<Subscription> EventBus::subscribe() {
    auto sub = std::make_shared<Subscription>(capacity_);
    std::lock_guard lock(mutex_);
    if (closed_) {
        sub->close();
        return sub;
    }
    subscribers_.push_back(sub);
    return sub;
}

void EventBus::publish(std::string type, nlohmann::json data) {
    // Pushing under the bus lock keeps every subscriber in seq order; a push
    // never waits on the consumer.
    std::lock_guard lock(mutex_);
    if (closed_) return;
    const Event e{next_seq_++, std::move(type), std::move(data)};
    std::erase_if(subscribers_, [](const std::weak_ptr<Subscription>& w) { return w.expired(); });
    for (const auto& w : subscribers_) {
        if (auto s = w.lock()) s->push(e);
    }
}

void EventBus::close() {
    std::vector<std::shared_ptr<Subscription>> live;
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
        for (const auto& w : subscribers_) {
            if (auto s = w.lock()) live.push_back(std::move(s));
        }
        subscribers_.clear();
    }
    for (const auto& s : live) s->close();
}

std::size_t EventBus::subscriber_count() const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(subscribers_.begin(), subscribers_.end(), [](const auto& w) { return !w.expired(); }));
}

}  // namespace nss::service
