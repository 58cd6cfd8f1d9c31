#include "nss/lab/scenario.hpp"

#include "nss/features/trace_io.hpp"
#include "nss/lab/counter_model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

namespace nss::lab {

namespace {

struct KindName {
    ScenarioKind kind;
    std::string_view name;
};

constexpr KindName kKindNames[] = {
    {ScenarioKind::Normal, "normal"},
    {ScenarioKind::Congestion, "congestion"},
    {ScenarioKind::ErrorBurst, "error-burst"},
    {ScenarioKind::BroadcastStorm, "broadcast-storm"},
    {ScenarioKind::Custom, "custom"},
};

void check_rate(double value, const char* name) {
    if (!std::isfinite(value) || value < 0) {
        throw LabError(std::string("scenario parameter ") + name + " must be a finite value >= 0");
    }
}

void check_ratio(double value, const char* name) {
    check_rate(value, name);
    if (value > 1) {
        throw LabError(std::string("scenario parameter ") + name + " must not exceed 1");
    }
}

nlohmann::json params_to_json(const RateParams& p) {
    return nlohmann::json{
        {"in_octets_rate", p.in_octets_rate},
        {"out_octets_rate", p.out_octets_rate},
        {"in_pkts_rate", p.in_pkts_rate},
        {"error_ratio", p.error_ratio},
        {"discard_ratio_start", p.discard_ratio_start},
        {"discard_ratio_end", p.discard_ratio_end},
        {"broadcast_ratio", p.broadcast_ratio},
        {"jitter", p.jitter},
    };
}

RateParams params_from_json(const nlohmann::json& j, RateParams p) {
    auto read = [&](const char* key, double& field) {
        if (j.contains(key)) field = j.at(key).get<double>();
    };
    read("in_octets_rate", p.in_octets_rate);
    read("out_octets_rate", p.out_octets_rate);
    read("in_pkts_rate", p.in_pkts_rate);
    read("error_ratio", p.error_ratio);
    read("discard_ratio_start", p.discard_ratio_start);
    read("discard_ratio_end", p.discard_ratio_end);
    read("broadcast_ratio", p.broadcast_ratio);
    read("jitter", p.jitter);
    return p;
}

std::string meta_path(const std::string& trace_path) {
    return trace_path + ".meta.json";
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
    for (const auto& k : kKindNames) {
        if (k.kind == kind) return k.name;
    }
    return "custom";
}

ScenarioKind parse_scenario_kind(std::string_view text) {
    std::string norm(text);
    std::replace(norm.begin(), norm.end(), '_', '-');
    std::transform(norm.begin(), norm.end(), norm.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& k : kKindNames) {
        if (k.name == norm) return k.kind;
    }
    throw LabError("unknown scenario '" + std::string(text) +
                   "' (expected normal, congestion, error-burst, broadcast-storm or custom)");
}

RateParams default_params(ScenarioKind kind) {
    RateParams p;
    switch (kind) {
        case ScenarioKind::Normal:
        case ScenarioKind::Custom:
            p.in_octets_rate = 1.2e6;
            p.out_octets_rate = 8.0e5;
            p.in_pkts_rate = 2000;
            p.error_ratio = 0.0002;
            p.discard_ratio_start = p.discard_ratio_end = 0.0005;
            p.broadcast_ratio = 0.02;
            break;
        case ScenarioKind::Congestion:
            p.in_octets_rate = 8.4e6;
            p.out_octets_rate = 5.6e6;
            p.in_pkts_rate = 5000;
            p.error_ratio = 0.0005;
            p.discard_ratio_start = 0.01;
            p.discard_ratio_end = 0.08;
            p.broadcast_ratio = 0.02;
            break;
        case ScenarioKind::ErrorBurst:
            p.in_octets_rate = 1.0e6;
            p.out_octets_rate = 7.0e5;
            p.in_pkts_rate = 1800;
            p.error_ratio = 0.15;
            p.discard_ratio_start = p.discard_ratio_end = 0.002;
            p.broadcast_ratio = 0.03;
            break;
        case ScenarioKind::BroadcastStorm:
            p.in_octets_rate = 2.0e6;
            p.out_octets_rate = 6.0e5;
            p.in_pkts_rate = 8000;
            p.error_ratio = 0.001;
            p.discard_ratio_start = p.discard_ratio_end = 0.003;
            p.broadcast_ratio = 0.8;
            break;
    }
    return p;
}

void Scenario::validate() const {
    if (duration_s < 1) {
        throw LabError("scenario duration_s must be >= 1");
    }
    check_rate(params.in_octets_rate, "in_octets_rate");
    check_rate(params.out_octets_rate, "out_octets_rate");
    check_rate(params.in_pkts_rate, "in_pkts_rate");
    check_ratio(params.error_ratio, "error_ratio");
    check_ratio(params.discard_ratio_start, "discard_ratio_start");
    check_ratio(params.discard_ratio_end, "discard_ratio_end");
    check_ratio(params.broadcast_ratio, "broadcast_ratio");
    check_ratio(params.jitter, "jitter");
    if (params.jitter >= 1) {
        throw LabError("scenario parameter jitter must be below 1");
    }
    if (target_id.empty()) {
        throw LabError("scenario target_id must not be empty");
    }
}

Scenario make_scenario(ScenarioKind kind, int duration_s, std::uint64_t seed) {
    Scenario s;
    s.kind = kind;
    s.duration_s = duration_s;
    s.seed = seed;
    s.params = default_params(kind);
    return s;
}

nlohmann::json to_json(const Scenario& s) {
    return nlohmann::json{
        {"kind", to_string(s.kind)},
        {"duration_s", s.duration_s},
        {"seed", s.seed},
        {"params", params_to_json(s.params)},
        {"counter_base", s.counter_base},
        {"target", s.target_id},
        {"if_index", s.if_index},
    };
}

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario s = make_scenario(parse_scenario_kind(j.at("kind").get<std::string>()),
                                   j.value("duration_s", 60), j.value("seed", std::uint64_t{0}));
        if (j.contains("params")) s.params = params_from_json(j.at("params"), s.params);
        s.counter_base = j.value("counter_base", std::uint32_t{0});
        s.target_id = j.value("target", std::string("lab"));
        s.if_index = j.value("if_index", 1);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw LabError(std::string("invalid scenario: ") + e.what());
    }
}

nlohmann::json to_json(const TraceMeta& m) {
    return nlohmann::json{
        {"scenario", to_string(m.kind)},
        {"seed", m.seed},
        {"generator", m.generator_version},
        {"poll_interval_s", m.poll_interval_s},
        {"duration_s", m.duration_s},
        {"counter_base", m.counter_base},
    };
}

TraceMeta trace_meta_from_json(const nlohmann::json& j) {
    try {
        TraceMeta m;
        m.kind = parse_scenario_kind(j.at("scenario").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.generator_version = j.at("generator").get<std::string>();
        m.poll_interval_s = j.value("poll_interval_s", 0);
        m.duration_s = j.value("duration_s", 0);
        m.counter_base = j.value("counter_base", std::uint32_t{0});
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw LabError(std::string("invalid trace metadata: ") + e.what());
    }
}

Trace generate_trace(const Scenario& scenario, int poll_interval_s, std::int64_t start_ms) {
    scenario.validate();
    if (poll_interval_s < 1) {
        throw LabError("poll_interval_s must be >= 1");
    }
    const int count = scenario.duration_s / poll_interval_s;
    if (count < 1) {
        throw LabError("duration shorter than one poll interval");
    }

    Trace trace;
    trace.meta = TraceMeta{scenario.kind,     scenario.seed,         std::string(kGeneratorVersion),
                           poll_interval_s,   scenario.duration_s,   scenario.counter_base};
    std::mt19937_64 rng(scenario.seed);
    CounterModel model(scenario.counter_base);
    const double poll = poll_interval_s;
    for (int i = 0; i < count; ++i) {
        features::CounterSnapshot snap;
        snap.target_id = scenario.target_id;
        snap.if_index = scenario.if_index;
        snap.ts_ms = start_ms + static_cast<std::int64_t>(i) * poll_interval_s * 1000;
        snap.uptime_ticks = (kInitialUptimeTicks + static_cast<std::int64_t>(i) * poll_interval_s * 100) % (1LL << 32);
        snap.counters = model.counters();
        trace.snapshots.push_back(std::move(snap));

        const double progress = (i + 0.5) * poll / scenario.duration_s;
        model.accumulate(draw_rates(scenario.params, progress, rng), poll);
    }
    return trace;
}

void write_trace_files(const std::string& path, const Trace& trace) {
    features::write_trace_file(path, trace.snapshots);
    std::ofstream meta(meta_path(path), std::ios::binary | std::ios::trunc);
    if (!meta) {
        throw LabError("cannot write " + meta_path(path));
    }
    meta << to_json(trace.meta).dump(2) << '\n';
}

Trace read_trace_files(const std::string& path) {
    Trace trace;
    trace.snapshots = features::read_trace_file(path);
    if (std::filesystem::exists(meta_path(path))) {
        std::ifstream in(meta_path(path));
        try {
            trace.meta = trace_meta_from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw LabError("invalid trace metadata in " + meta_path(path) + ": " + e.what());
        }
    }
    return trace;
}

LabeledDataset labeled_dataset(const std::vector<LabeledScenario>& scenarios, int poll_interval_s,
                               const std::vector<std::string>& feature_order) {
    std::set<classifier::ClassId> ids;
    for (const auto& ls : scenarios) ids.insert(ls.label.id);
    if (ids.size() < 2) {
        throw LabError("labeled_dataset needs at least 2 distinct labels");
    }

    LabeledDataset out;
    std::vector<classifier::ClassLabel> labels;
    std::vector<std::string> sources;
    for (const auto& ls : scenarios) {
        Scenario warm = ls.scenario;
        warm.duration_s += poll_interval_s;
        const Trace trace = generate_trace(warm, poll_interval_s);
        features::StreamCursor cursor;
        std::size_t n = 0;
        for (const auto& snap : trace.snapshots) {
            const auto result = cursor.push(snap);
            if (const auto* rates = std::get_if<features::RateVector>(&result)) {
                out.raw.push_back(rates->features(feature_order));
                labels.push_back(ls.label);
                sources.push_back(std::string(to_string(ls.scenario.kind)) + ":" + std::to_string(ls.scenario.seed) +
                                  ":" + std::to_string(n++));
            }
        }
    }
    if (out.raw.empty()) {
        throw LabError("scenarios produced no samples");
    }

    bool any_varies = false;
    for (std::size_t f = 0; f < feature_order.size() && !any_varies; ++f) {
        for (const auto& row : out.raw) {
            if (row[f] != out.raw.front()[f]) {
                any_varies = true;
                break;
            }
        }
    }
    if (!any_varies) {
        throw LabError("degenerate dataset: every feature is identical across all samples");
    }

    out.norm = features::fit_normalizer_rows(out.raw, feature_order);
    out.samples.reserve(out.raw.size());
    for (std::size_t i = 0; i < out.raw.size(); ++i) {
        out.samples.push_back(
            classifier::TrainingSample{features::normalize_values(out.raw[i], out.norm), labels[i], sources[i]});
    }
    return out;
}

std::vector<LabeledScenario> reference_scenarios(int duration_s, std::uint64_t seed) {
    const ScenarioKind kinds[] = {ScenarioKind::Normal, ScenarioKind::Congestion, ScenarioKind::ErrorBurst,
                                  ScenarioKind::BroadcastStorm};
    const char* names[] = {"Normal", "Congestion", "ErrorBurst", "BroadcastStorm"};
    std::vector<LabeledScenario> out;
    for (std::uint32_t i = 0; i < 4; ++i) {
        out.push_back(LabeledScenario{make_scenario(kinds[i], duration_s, seed + i), {i, names[i]}});
    }
    return out;
}

}  // namespace nss::lab
