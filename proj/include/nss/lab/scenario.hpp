#pragma once

#include "nss/classifier/potential.hpp"
#include "nss/features/pipeline.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace nss::lab {

class LabError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScenarioKind { Normal, Congestion, ErrorBurst, BroadcastStorm, Custom };

/// "normal", "congestion", "error-burst", "broadcast-storm", "custom".
std::string_view to_string(ScenarioKind kind);
/// Accepts the names above; underscores are read as dashes.
ScenarioKind parse_scenario_kind(std::string_view text);

/// Mean per-second rates and per-packet fractions of one network state.
struct RateParams {
    double in_octets_rate = 0;
    double out_octets_rate = 0;
    /// Inbound packets per second, unicast plus non-unicast.
    double in_pkts_rate = 0;
    double error_ratio = 0;
    /// Discard fraction ramps linearly from start to end over the scenario.
    double discard_ratio_start = 0;
    double discard_ratio_end = 0;
    double broadcast_ratio = 0;
    /// Each rate and ratio is scaled by U[1 - jitter, 1 + jitter] per segment.
    double jitter = 0.2;

    friend bool operator==(const RateParams&, const RateParams&) = default;
};

/// Reference envelopes for the four named states.
RateParams default_params(ScenarioKind kind);

struct Scenario {
    ScenarioKind kind = ScenarioKind::Normal;
    int duration_s = 60;
    std::uint64_t seed = 0;
    RateParams params = default_params(ScenarioKind::Normal);
    /// Initial value of every counter; a base near 2^32 forces a wrap.
    std::uint32_t counter_base = 0;
    std::string target_id = "lab";
    int if_index = 1;

    /// Throws LabError on duration_s < 1, negative rates or ratios above 1.
    void validate() const;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario make_scenario(ScenarioKind kind, int duration_s, std::uint64_t seed);

nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

inline constexpr std::string_view kGeneratorVersion = "nss-lab/1";

struct TraceMeta {
    ScenarioKind kind = ScenarioKind::Normal;
    std::uint64_t seed = 0;
    std::string generator_version{kGeneratorVersion};
    int poll_interval_s = 0;
    int duration_s = 0;
    std::uint32_t counter_base = 0;
    friend bool operator==(const TraceMeta&, const TraceMeta&) = default;
};

nlohmann::json to_json(const TraceMeta& meta);
TraceMeta trace_meta_from_json(const nlohmann::json& j);

struct Trace {
    std::vector<features::CounterSnapshot> snapshots;
    TraceMeta meta;
};

inline constexpr std::int64_t kTraceEpochMs = 1'700'000'000'000;
inline constexpr std::int64_t kInitialUptimeTicks = 360'000;

/// duration_s / poll_interval_s snapshots taken at t = 0, P, 2P, ... of a
/// simulated clock starting at `start_ms`. Deterministic for a given scenario.
Trace generate_trace(const Scenario& scenario, int poll_interval_s, std::int64_t start_ms = kTraceEpochMs);

/// Writes the JSON Lines trace and its metadata sidecar `<path>.meta.json`.
void write_trace_files(const std::string& path, const Trace& trace);
/// Reads a trace; metadata is filled when the sidecar exists.
Trace read_trace_files(const std::string& path);

struct LabeledScenario {
    Scenario scenario;
    classifier::ClassLabel label;
};

struct LabeledDataset {
    std::vector<classifier::TrainingSample> samples;
    NormParams norm;
    /// Un-normalized feature rows, parallel to samples.
    std::vector<std::vector<double>> raw;
};

/// Turns each scenario into samples through the feature pipeline, with one
/// normalizer fitted over the union. One extra warm-up poll is generated per
/// scenario, so duration/poll snapshots yield as many samples.
LabeledDataset labeled_dataset(const std::vector<LabeledScenario>& scenarios, int poll_interval_s,
                               const std::vector<std::string>& feature_order = features::default_feature_order());

/// Normal, Congestion, ErrorBurst and BroadcastStorm with labels 0..3 and
/// seeds derived from `seed`; the reference training set for desk runs.
std::vector<LabeledScenario> reference_scenarios(int duration_s, std::uint64_t seed);

}  // namespace nss::lab
