#include "nss/features/pipeline.hpp"

#include <cmath>

namespace nss::features {

namespace {

constexpr double kDegenerateStd = 1e-9;

double delta_of(const std::map<std::string, std::uint32_t>& deltas, const char* name) {
    auto it = deltas.find(name);
    return it == deltas.end() ? 0.0 : static_cast<double>(it->second);
}

double ratio(double numerator, double denominator) {
    return denominator == 0.0 ? 0.0 : numerator / denominator;
}

}  // namespace

std::vector<std::string> default_feature_order() {
    return {kFeatureNames.begin(), kFeatureNames.end()};
}

bool CounterSnapshot::degraded() const {
    for (auto name : kCounterNames) {
        if (!counters.contains(std::string(name))) {
            return true;
        }
    }
    return false;
}

DeltaOutcome counter_delta(const CounterSnapshot& prev, const CounterSnapshot& curr) {
    if (prev.target_id != curr.target_id || prev.if_index != curr.if_index) {
        throw FeatureError("snapshots belong to different streams: " + prev.target_id + "/" +
                           std::to_string(prev.if_index) + " vs " + curr.target_id + "/" +
                           std::to_string(curr.if_index));
    }
    if (curr.ts_ms <= prev.ts_ms) {
        throw FeatureError("non-increasing timestamp in stream " + curr.target_id + "/" +
                           std::to_string(curr.if_index));
    }
    if (curr.uptime_ticks < prev.uptime_ticks) {
        return CounterReset{};
    }
    CounterDeltas out;
    out.interval_s = static_cast<double>(curr.ts_ms - prev.ts_ms) / 1000.0;
    for (const auto& [name, value] : curr.counters) {
        auto it = prev.counters.find(name);
        if (it != prev.counters.end()) {
            // Unsigned subtraction is already modulo 2^32.
            out.deltas.emplace(name, static_cast<std::uint32_t>(value - it->second));
        }
    }
    return out;
}

std::optional<double> RateVector::feature(std::string_view name) const {
    auto rate = [this](const char* counter) {
        auto it = rates.find(counter);
        return it == rates.end() ? 0.0 : it->second;
    };
    if (name == "in_octets_rate") return rate("in_octets");
    if (name == "out_octets_rate") return rate("out_octets");
    if (name == "in_pkts_rate") return rate("in_ucast_pkts") + rate("in_nucast_pkts");
    if (name == "error_ratio") return error_ratio;
    if (name == "discard_ratio") return discard_ratio;
    if (name == "broadcast_ratio") return broadcast_ratio;
    constexpr std::string_view suffix = "_rate";
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
        auto it = rates.find(std::string(name.substr(0, name.size() - suffix.size())));
        if (it != rates.end()) {
            return it->second;
        }
    }
    return std::nullopt;
}

std::vector<double> RateVector::features(std::span<const std::string> order) const {
    std::vector<double> out;
    out.reserve(order.size());
    for (const auto& name : order) {
        auto value = feature(name);
        if (!value) {
            throw FeatureError("missing feature: " + name);
        }
        out.push_back(*value);
    }
    return out;
}

RateVector to_rates(const std::map<std::string, std::uint32_t>& deltas, double interval_s) {
    if (!(interval_s > 0.0) || !std::isfinite(interval_s)) {
        throw FeatureError("rate interval must be > 0");
    }
    RateVector out;
    out.interval_s = interval_s;
    for (auto name : kCounterNames) {
        out.rates.emplace(std::string(name), delta_of(deltas, std::string(name).c_str()) / interval_s);
    }
    for (const auto& [name, value] : deltas) {
        out.rates.emplace(name, static_cast<double>(value) / interval_s);
    }
    const double packets = delta_of(deltas, "in_ucast_pkts") + delta_of(deltas, "in_nucast_pkts");
    out.error_ratio = ratio(delta_of(deltas, "in_errors") + delta_of(deltas, "out_errors"), packets);
    out.discard_ratio = ratio(delta_of(deltas, "in_discards") + delta_of(deltas, "out_discards"), packets);
    out.broadcast_ratio = ratio(delta_of(deltas, "in_nucast_pkts"), packets);
    return out;
}

NormParams fit_normalizer_rows(std::span<const std::vector<double>> rows, std::vector<std::string> feature_order) {
    if (rows.empty()) {
        throw FeatureError("cannot fit a normalizer on zero samples");
    }
    const std::size_t dim = feature_order.size();
    if (dim == 0) {
        throw FeatureError("feature order is empty");
    }
    NormParams params;
    params.mean.assign(dim, 0.0);
    params.std_dev.assign(dim, 0.0);
    for (const auto& row : rows) {
        if (row.size() != dim) {
            throw FeatureError("sample has " + std::to_string(row.size()) + " features, expected " +
                               std::to_string(dim));
        }
        for (std::size_t i = 0; i < dim; ++i) {
            if (!std::isfinite(row[i])) {
                throw FeatureError("non-finite feature value for " + feature_order[i]);
            }
            params.mean[i] += row[i];
        }
    }
    const double n = static_cast<double>(rows.size());
    for (auto& m : params.mean) {
        m /= n;
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = row[i] - params.mean[i];
            params.std_dev[i] += d * d;
        }
    }
    for (auto& s : params.std_dev) {
        s = std::sqrt(s / n);
        if (s < kDegenerateStd) {
            s = 1.0;
        }
    }
    params.feature_order = std::move(feature_order);
    return params;
}

NormParams fit_normalizer(std::span<const RateVector> samples, const std::vector<std::string>& feature_order) {
    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
        rows.push_back(s.features(feature_order));
    }
    return fit_normalizer_rows(rows, feature_order);
}

classifier::FeatureVector normalize_values(std::span<const double> raw, const NormParams& params) {
    if (raw.size() != params.dim()) {
        throw FeatureError("expected " + std::to_string(params.dim()) + " features, got " +
                           std::to_string(raw.size()));
    }
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = (raw[i] - params.mean[i]) / params.std_dev[i];
    }
    return classifier::FeatureVector(std::move(out));
}

classifier::FeatureVector normalize(const RateVector& rates, const NormParams& params) {
    const auto raw = rates.features(params.feature_order);
    return normalize_values(raw, params);
}

std::vector<double> denormalize(const classifier::FeatureVector& vector, const NormParams& params) {
    if (vector.dim() != params.dim()) {
        throw FeatureError("expected " + std::to_string(params.dim()) + " features, got " +
                           std::to_string(vector.dim()));
    }
    std::vector<double> out(vector.dim());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = vector[i] * params.std_dev[i] + params.mean[i];
    }
    return out;
}

StreamCursor::Output StreamCursor::push(const CounterSnapshot& snapshot) {
    if (!last_) {
        last_ = snapshot;
        return NoBaseline{};
    }
    auto outcome = counter_delta(*last_, snapshot);
    last_ = snapshot;
    if (std::holds_alternative<CounterReset>(outcome)) {
        return CounterReset{};
    }
    const auto& deltas = std::get<CounterDeltas>(outcome);
    return to_rates(deltas.deltas, deltas.interval_s);
}

}  // namespace nss::features
