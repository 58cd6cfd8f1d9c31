#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>

namespace nss {

/// Millisecond time source. Scaled clocks let a desk run compress minutes of
/// scenario time into seconds of wall time.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
    /// Wall time that passes while this clock advances by `ms`.
    virtual std::chrono::nanoseconds real_duration(double ms) const = 0;
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() const override {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    }
    std::chrono::nanoseconds real_duration(double ms) const override {
        return std::chrono::nanoseconds(static_cast<std::int64_t>(ms * 1e6));
    }
};

/// Starts at `epoch_ms` and runs `multiplier` times faster than wall time.
class ScaledClock final : public Clock {
public:
    explicit ScaledClock(double multiplier, std::int64_t epoch_ms = SystemClock{}.now_ms())
        : multiplier_(multiplier), epoch_ms_(epoch_ms), start_(std::chrono::steady_clock::now()) {}

    std::int64_t now_ms() const override {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        const double real_ms = std::chrono::duration<double, std::milli>(elapsed).count();
        return epoch_ms_ + static_cast<std::int64_t>(real_ms * multiplier_);
    }
    std::chrono::nanoseconds real_duration(double ms) const override {
        return std::chrono::nanoseconds(static_cast<std::int64_t>(ms * 1e6 / multiplier_));
    }
    double multiplier() const { return multiplier_; }

private:
    double multiplier_;
    std::int64_t epoch_ms_;
    std::chrono::steady_clock::time_point start_;
};

/// Test clock that only moves when told to.
class ManualClock final : public Clock {
public:
    explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
    std::int64_t now_ms() const override { return now_.load(); }
    std::chrono::nanoseconds real_duration(double) const override { return std::chrono::milliseconds(1); }
    void set(std::int64_t ms) { now_.store(ms); }
    void advance(std::int64_t ms) { now_.fetch_add(ms); }

private:
    std::atomic<std::int64_t> now_;
};

inline std::shared_ptr<const Clock> system_clock() {
    static const auto clock = std::make_shared<SystemClock>();
    return clock;
}

}  // namespace nss
