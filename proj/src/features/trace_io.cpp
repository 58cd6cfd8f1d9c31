#include "nss/features/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace nss::features {

nlohmann::json snapshot_to_json(const CounterSnapshot& snapshot) {
    nlohmann::json counters = nlohmann::json::object();
    for (const auto& [name, value] : snapshot.counters) {
        counters[name] = value;
    }
    return {
        {"target", snapshot.target_id},     {"if_index", snapshot.if_index},
        {"ts_ms", snapshot.ts_ms},          {"uptime_ticks", snapshot.uptime_ticks},
        {"counters", std::move(counters)},
    };
}

CounterSnapshot snapshot_from_json(const nlohmann::json& j) {
    try {
        CounterSnapshot s;
        s.target_id = j.at("target").get<std::string>();
        s.if_index = j.at("if_index").get<int>();
        s.ts_ms = j.at("ts_ms").get<std::int64_t>();
        s.uptime_ticks = j.at("uptime_ticks").get<std::int64_t>();
        for (const auto& [name, value] : j.at("counters").items()) {
            if (!value.is_number_integer()) {
                throw FeatureError("counter " + name + " is not an integer");
            }
            const auto v = value.get<std::int64_t>();
            if (v < 0 || v > std::numeric_limits<std::uint32_t>::max()) {
                throw FeatureError("counter " + name + " is outside the 32-bit range");
            }
            s.counters.emplace(name, static_cast<std::uint32_t>(v));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FeatureError(std::string("bad snapshot: ") + e.what());
    }
}

std::string snapshot_to_line(const CounterSnapshot& snapshot) {
    return snapshot_to_json(snapshot).dump();
}

void write_trace(std::ostream& out, const std::vector<CounterSnapshot>& snapshots) {
    for (const auto& s : snapshots) {
        out << snapshot_to_line(s) << '\n';
    }
}

std::vector<CounterSnapshot> read_trace(std::istream& in) {
    std::vector<CounterSnapshot> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(snapshot_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw FeatureError("trace line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<CounterSnapshot> read_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw FeatureError("cannot open trace file " + path);
    }
    return read_trace(in);
}

void write_trace_file(const std::string& path, const std::vector<CounterSnapshot>& snapshots) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FeatureError("cannot write trace file " + path);
    }
    write_trace(out, snapshots);
    if (!out.flush()) {
        throw FeatureError("write failed for " + path);
    }
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_feature_csv(std::ostream& out, const std::vector<std::string>& feature_order,
                       const std::vector<classifier::FeatureVector>& vectors) {
    for (std::size_t i = 0; i < feature_order.size(); ++i) {
        out << (i ? "," : "") << feature_order[i];
    }
    out << '\n';
    for (const auto& v : vectors) {
        if (v.dim() != feature_order.size()) {
            throw FeatureError("vector dimension does not match the feature order");
        }
        for (std::size_t i = 0; i < v.dim(); ++i) {
            out << (i ? "," : "") << format_double(v[i]);
        }
        out << '\n';
    }
}

}  // namespace nss::features
