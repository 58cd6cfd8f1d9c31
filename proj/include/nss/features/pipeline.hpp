#pragma once

// Counter snapshots to normalized feature vectors: Counter32 deltas with wrap
// and reboot handling, per-second rates, derived ratios, z-score scaling.

#include "nss/classifier/potential.hpp"
#include "nss/features/norm_params.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nss::features {

class FeatureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::array<std::string_view, 8> kCounterNames = {
    "in_octets",   "out_octets",   "in_errors",      "out_errors",
    "in_discards", "out_discards", "in_nucast_pkts", "in_ucast_pkts",
};

inline constexpr std::array<std::string_view, 6> kFeatureNames = {
    "in_octets_rate", "out_octets_rate", "in_pkts_rate", "error_ratio", "discard_ratio", "broadcast_ratio",
};

std::vector<std::string> default_feature_order();

struct CounterSnapshot {
    std::string target_id;
    int if_index = 0;
    std::int64_t ts_ms = 0;
    std::int64_t uptime_ticks = 0;  // hundredths of a second
    std::map<std::string, std::uint32_t> counters;

    /// True when any of the standard counters is missing.
    bool degraded() const;

    friend bool operator==(const CounterSnapshot&, const CounterSnapshot&) = default;
};

struct CounterDeltas {
    std::map<std::string, std::uint32_t> deltas;
    double interval_s = 0.0;
};

/// The device rebooted between the two snapshots; no deltas are meaningful.
struct CounterReset {};

using DeltaOutcome = std::variant<CounterDeltas, CounterReset>;

/// Per-counter (curr - prev) mod 2^32 over counters present in both
/// snapshots. Uptime going backwards means a reboot.
DeltaOutcome counter_delta(const CounterSnapshot& prev, const CounterSnapshot& curr);

struct RateVector {
    std::map<std::string, double> rates;  // per counter, units per second
    double interval_s = 0.0;
    double error_ratio = 0.0;
    double discard_ratio = 0.0;
    double broadcast_ratio = 0.0;

    /// Derived feature by name (one of kFeatureNames, or "<counter>_rate").
    std::optional<double> feature(std::string_view name) const;
    /// Features in the given order; throws FeatureError on an unknown name.
    std::vector<double> features(std::span<const std::string> order) const;

    friend bool operator==(const RateVector&, const RateVector&) = default;
};

/// Missing counters count as zero. Ratios with a zero denominator are zero.
RateVector to_rates(const std::map<std::string, std::uint32_t>& deltas, double interval_s);

/// Population mean and std per feature; std below 1e-9 is replaced by 1.
NormParams fit_normalizer(std::span<const RateVector> samples,
                          const std::vector<std::string>& feature_order = default_feature_order());
NormParams fit_normalizer_rows(std::span<const std::vector<double>> rows, std::vector<std::string> feature_order);

classifier::FeatureVector normalize(const RateVector& rates, const NormParams& params);
classifier::FeatureVector normalize_values(std::span<const double> raw, const NormParams& params);
std::vector<double> denormalize(const classifier::FeatureVector& vector, const NormParams& params);

/// Pairs consecutive snapshots of one (target, interface) stream.
class StreamCursor {
public:
    struct NoBaseline {};
    using Output = std::variant<NoBaseline, CounterReset, RateVector>;

    /// First snapshot yields NoBaseline. A reset re-bases the chain on the
    /// post-reboot snapshot. Throws FeatureError on a stream mismatch or a
    /// non-increasing timestamp, leaving the cursor unchanged.
    Output push(const CounterSnapshot& snapshot);

    const std::optional<CounterSnapshot>& last() const { return last_; }

private:
    std::optional<CounterSnapshot> last_;
};

}  // namespace nss::features
