#pragma once

#include "nss/lab/scenario.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>

namespace nss::lab {

/// Per-second rates of every counter during one segment.
struct SegmentRates {
    std::array<double, 8> per_counter{};  // indexed like features::kCounterNames
};

/// Draws one segment's jittered rates. `progress` in [0, 1] is the position
/// of the segment midpoint within the scenario, used by ramped parameters.
SegmentRates draw_rates(const RateParams& params, double progress, std::mt19937_64& rng);

/// Cumulative counters fed segment by segment. Values are kept as doubles
/// and exposed as floor(total) + base modulo 2^32.
class CounterModel {
public:
    explicit CounterModel(std::uint32_t counter_base = 0) : base_(counter_base) {}

    void accumulate(const SegmentRates& rates, double seconds);
    /// Counters after a further partial `seconds` at `rates`, without mutating.
    std::map<std::string, std::uint32_t> counters(const SegmentRates* rates = nullptr, double seconds = 0) const;
    /// Reboot: totals restart from zero.
    void reset();

private:
    std::uint32_t base_;
    std::array<double, 8> total_{};
};

}  // namespace nss::lab
