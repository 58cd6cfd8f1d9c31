#pragma once

// Trace files are JSON Lines, one snapshot per line:
//   {"target":str, "if_index":int, "ts_ms":int, "uptime_ticks":int, "counters":{name:int,...}}

#include "nss/features/pipeline.hpp"

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace nss::features {

nlohmann::json snapshot_to_json(const CounterSnapshot& snapshot);
/// Throws FeatureError on missing fields or out-of-range counters.
CounterSnapshot snapshot_from_json(const nlohmann::json& j);

std::string snapshot_to_line(const CounterSnapshot& snapshot);
void write_trace(std::ostream& out, const std::vector<CounterSnapshot>& snapshots);
/// Blank lines are skipped; a malformed line throws FeatureError naming its line number.
std::vector<CounterSnapshot> read_trace(std::istream& in);
std::vector<CounterSnapshot> read_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const std::vector<CounterSnapshot>& snapshots);

/// Header row is the feature order; one row per vector, 17 significant digits.
void write_feature_csv(std::ostream& out, const std::vector<std::string>& feature_order,
                       const std::vector<classifier::FeatureVector>& vectors);

std::string format_double(double value);

}  // namespace nss::features
