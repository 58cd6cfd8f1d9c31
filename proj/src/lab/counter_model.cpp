#include "nss/lab/counter_model.hpp"

#include <algorithm>
#include <cmath>

namespace nss::lab {

namespace {

// Bit-level construction keeps traces identical across standard libraries.
double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double jittered(double mean, double jitter, std::mt19937_64& rng) {
    return mean * (1.0 - jitter + 2.0 * jitter * unit(rng));
}

enum Counter { kInOctets, kOutOctets, kInErrors, kOutErrors, kInDiscards, kOutDiscards, kInNucast, kInUcast };

}  // namespace

SegmentRates draw_rates(const RateParams& p, double progress, std::mt19937_64& rng) {
    progress = std::clamp(progress, 0.0, 1.0);
    const double in_octets = jittered(p.in_octets_rate, p.jitter, rng);
    const double out_octets = jittered(p.out_octets_rate, p.jitter, rng);
    const double pkts = jittered(p.in_pkts_rate, p.jitter, rng);
    const double error = std::min(1.0, jittered(p.error_ratio, p.jitter, rng));
    const double discard_mean = p.discard_ratio_start + (p.discard_ratio_end - p.discard_ratio_start) * progress;
    const double discard = std::min(1.0, jittered(discard_mean, p.jitter, rng));
    const double broadcast = std::min(1.0, jittered(p.broadcast_ratio, p.jitter, rng));

    SegmentRates r;
    r.per_counter[kInOctets] = in_octets;
    r.per_counter[kOutOctets] = out_octets;
    // The error and discard fractions cover both directions over inbound
    // packets; two thirds are inbound.
    r.per_counter[kInErrors] = pkts * error * 2.0 / 3.0;
    r.per_counter[kOutErrors] = pkts * error / 3.0;
    r.per_counter[kInDiscards] = pkts * discard * 2.0 / 3.0;
    r.per_counter[kOutDiscards] = pkts * discard / 3.0;
    r.per_counter[kInNucast] = pkts * broadcast;
    r.per_counter[kInUcast] = pkts * (1.0 - broadcast);
    return r;
}

void CounterModel::accumulate(const SegmentRates& rates, double seconds) {
    for (std::size_t i = 0; i < total_.size(); ++i) {
        total_[i] += rates.per_counter[i] * seconds;
    }
}

std::map<std::string, std::uint32_t> CounterModel::counters(const SegmentRates* rates, double seconds) const {
    std::map<std::string, std::uint32_t> out;
    for (std::size_t i = 0; i < total_.size(); ++i) {
        double t = total_[i];
        if (rates != nullptr) {
            t += rates->per_counter[i] * seconds;
        }
        const auto whole = static_cast<std::uint64_t>(std::floor(t));
        out.emplace(std::string(features::kCounterNames[i]), static_cast<std::uint32_t>(whole + base_));
    }
    return out;
}

void CounterModel::reset() {
    base_ = 0;
    total_.fill(0.0);
}

}  // namespace nss::lab
