#include "nss/service/config.hpp"

#include "nss/features/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace nss::service {

namespace {

struct DefaultClass {
    const char* name;
    const char* color;
    const char* strategy;
};

constexpr DefaultClass kDefaultClasses[] = {
    {"Normal", "#2e7d32", "no action"},
    {"Congestion", "#f9a825", "rebalance traffic or add uplink capacity"},
    {"ErrorBurst", "#c62828", "inspect cabling, transceivers and duplex settings"},
    {"BroadcastStorm", "#6a1b9a", "enable storm control and locate the broadcast source"},
};

constexpr const char* kPalette[] = {"#1565c0", "#ef6c00", "#00838f", "#ad1457", "#4e342e", "#558b2f"};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(key + ": '" + value + "' is not a valid number");
    }
    return out;
}

double parse_double(const std::string& value, const std::string& key) {
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(out)) {
        throw ConfigError(key + ": '" + value + "' is not a finite number");
    }
    return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
    std::string v = value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(key + ": '" + value + "' is not a boolean");
}

/// Splits `prefix.<name>.<field>`; the name may not contain dots.
std::optional<std::pair<std::string, std::string>> scoped_key(const std::string& key, std::string_view prefix) {
    if (key.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string rest = key.substr(prefix.size());
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == rest.size()) return std::nullopt;
    return std::make_pair(rest.substr(0, dot), rest.substr(dot + 1));
}

}  // namespace

ServiceConfig::ServiceConfig() : feature_order(features::default_feature_order()) {
    classifier::ClassId id = 0;
    for (const auto& c : kDefaultClasses) {
        classes.push_back(ClassSpec{{id++, c.name}, c.color, c.strategy});
    }
}

void ServiceConfig::validate() const {
    if (classes.size() < 2) {
        throw ConfigError("class set needs at least 2 classes");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& c = classes[i];
        if (c.label.id != i) throw ConfigError("class ids must be 0..K-1 in order");
        if (c.label.name.empty()) throw ConfigError("class name is empty");
        if (c.label.name == store::kUnidentifiedLabel) throw ConfigError("'Unidentified' is reserved");
        if (!names.insert(c.label.name).second) throw ConfigError("duplicate class " + c.label.name);
        if (c.strategy.empty()) throw ConfigError("class " + c.label.name + " has no strategy");
    }
    if (unidentified_strategy.empty()) throw ConfigError("Unidentified has no strategy");
    if (feature_order.empty()) throw ConfigError("feature list is empty");
    for (const auto& f : feature_order) {
        const bool derived =
            std::find(features::kFeatureNames.begin(), features::kFeatureNames.end(), f) != features::kFeatureNames.end();
        const bool counter_rate =
            f.size() > 5 && f.compare(f.size() - 5, 5, "_rate") == 0 &&
            std::find(features::kCounterNames.begin(), features::kCounterNames.end(), f.substr(0, f.size() - 5)) !=
                features::kCounterNames.end();
        if (!derived && !counter_rate) throw ConfigError("unknown feature " + f);
    }
    try {
        classifier::validate(train);
        classifier::validate(kernel);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    std::set<std::string> target_ids;
    for (const auto& t : targets) {
        try {
            t.validate();
        } catch (const std::exception& e) {
            throw ConfigError("target " + t.id + ": " + e.what());
        }
        if (!target_ids.insert(t.id).second) throw ConfigError("duplicate target " + t.id);
    }
    if (poll.attempts < 1 || poll.timeout.count() < 1) throw ConfigError("poll timeout and attempts must be positive");
    if (scheduler.max_in_flight < 1) throw ConfigError("scheduler.max_in_flight must be positive");
    if (ingest_queue < 1 || subscriber_queue < 1) throw ConfigError("queue sizes must be positive");
    if (history.records_per_segment < 1 || history.max_records < 1) {
        throw ConfigError("history sizes must be positive");
    }
    split_listen(listen);
}

std::vector<classifier::ClassLabel> ServiceConfig::class_labels() const {
    std::vector<classifier::ClassLabel> out;
    for (const auto& c : classes) out.push_back(c.label);
    return out;
}

const ClassSpec* ServiceConfig::find_class(std::string_view name) const {
    for (const auto& c : classes) {
        if (c.label.name == name) return &c;
    }
    return nullptr;
}

std::optional<std::string> ServiceConfig::strategy_for(std::string_view label) const {
    if (label == store::kUnidentifiedLabel) return unidentified_strategy;
    if (const auto* c = find_class(label)) return c->strategy;
    return std::nullopt;
}

ServiceConfig parse_config(std::string_view text) {
    ServiceConfig cfg;
    std::map<std::string, std::pair<std::string, int>> values;  // key -> (value, line)

    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!values.emplace(key, std::make_pair(value, line_no)).second) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
        }
    }

    auto at_line = [&](const std::string& key, const std::string& msg) {
        return ConfigError("line " + std::to_string(values.at(key).second) + ": " + msg);
    };

    if (const auto it = values.find("classes"); it != values.end()) {
        cfg.classes.clear();
        classifier::ClassId id = 0;
        for (const auto& name : split_list(it->second.first)) {
            cfg.classes.push_back(ClassSpec{{id, name}, kPalette[id % std::size(kPalette)], ""});
            ++id;
        }
    }

    std::map<std::string, snmp::Target> targets;
    std::vector<std::string> target_order;

    std::vector<std::pair<int, std::string>> by_line;
    for (const auto& [key, entry] : values) by_line.emplace_back(entry.second, key);
    std::sort(by_line.begin(), by_line.end());

    for (const auto& [line_number, key] : by_line) {
        const std::string& value = values.at(key).first;
        try {
            if (key == "classes") {
                continue;
            } else if (key == "listen") {
                cfg.listen = value;
            } else if (key == "data_dir") {
                cfg.data_dir = value;
            } else if (key == "api_token") {
                if (!value.empty()) cfg.api_token = value;
            } else if (key == "ui_dir") {
                if (!value.empty()) cfg.ui_dir = value;
            } else if (key == "online_reorg") {
                cfg.online_reorg = parse_bool(value, key);
            } else if (key == "features") {
                cfg.feature_order = split_list(value);
            } else if (key == "unidentified.strategy") {
                cfg.unidentified_strategy = value;
            } else if (key == "unidentified.color") {
                cfg.unidentified_color = value;
            } else if (key == "train.delta") {
                cfg.train.delta = parse_double(value, key);
            } else if (key == "train.max_passes") {
                cfg.train.max_passes = parse_number<int>(value, key);
            } else if (key == "train.epsilon") {
                cfg.train.epsilon = parse_double(value, key);
            } else if (key == "train.variant") {
                if (value == "a" || value == "A") {
                    cfg.train.variant = classifier::UpdateVariant::A;
                } else if (value == "b" || value == "B") {
                    cfg.train.variant = classifier::UpdateVariant::B;
                } else {
                    throw ConfigError(key + ": expected a or b");
                }
            } else if (key == "kernel.alpha") {
                cfg.kernel.alpha = parse_double(value, key);
            } else if (key == "scheduler.seed") {
                cfg.scheduler.seed = parse_number<std::uint64_t>(value, key);
            } else if (key == "scheduler.max_in_flight") {
                cfg.scheduler.max_in_flight = parse_number<std::size_t>(value, key);
            } else if (key == "poll.timeout_ms") {
                cfg.poll.timeout = std::chrono::milliseconds(parse_number<int>(value, key));
            } else if (key == "poll.attempts") {
                cfg.poll.attempts = parse_number<int>(value, key);
            } else if (key == "history.records_per_segment") {
                cfg.history.records_per_segment = parse_number<std::size_t>(value, key);
            } else if (key == "history.max_records") {
                cfg.history.max_records = parse_number<std::size_t>(value, key);
            } else if (key == "queue.ingest") {
                cfg.ingest_queue = parse_number<std::size_t>(value, key);
            } else if (key == "queue.subscriber") {
                cfg.subscriber_queue = parse_number<std::size_t>(value, key);
            } else if (const auto cls = scoped_key(key, "class.")) {
                auto it = std::find_if(cfg.classes.begin(), cfg.classes.end(),
                                       [&](const ClassSpec& c) { return c.label.name == cls->first; });
                if (it == cfg.classes.end()) throw ConfigError("class " + cls->first + " is not in classes");
                if (cls->second == "color") {
                    it->color = value;
                } else if (cls->second == "strategy") {
                    it->strategy = value;
                } else {
                    throw ConfigError("unknown key " + key);
                }
            } else if (const auto tgt = scoped_key(key, "target.")) {
                auto [it, inserted] = targets.try_emplace(tgt->first);
                if (inserted) {
                    it->second.id = tgt->first;
                    target_order.push_back(tgt->first);
                }
                auto& target = it->second;
                if (tgt->second == "host") {
                    target.host = value;
                } else if (tgt->second == "port") {
                    target.port = parse_number<std::uint16_t>(value, key);
                } else if (tgt->second == "community") {
                    target.community = value;
                } else if (tgt->second == "if_indexes") {
                    target.if_indexes.clear();
                    for (const auto& item : split_list(value)) target.if_indexes.push_back(parse_number<int>(item, key));
                } else if (tgt->second == "interval") {
                    target.poll_interval_s = parse_number<int>(value, key);
                } else {
                    throw ConfigError("unknown key " + key);
                }
            } else {
                throw ConfigError("unknown key " + key);
            }
        } catch (const ConfigError& e) {
            throw at_line(key, e.what());
        }
    }

    for (const auto& id : target_order) {
        if (!values.count("target." + id + ".host")) {
            throw ConfigError("target " + id + " has no host");
        }
        cfg.targets.push_back(targets.at(id));
    }
    cfg.validate();
    return cfg;
}

EnvLookup process_env() {
    return [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (v == nullptr) return std::nullopt;
        return std::string(v);
    };
}

void apply_env_overrides(ServiceConfig& config, const EnvLookup& env) {
    if (const auto v = env("NSS_LISTEN"); v && !v->empty()) config.listen = *v;
    if (const auto v = env("NSS_DATA_DIR"); v && !v->empty()) config.data_dir = *v;
    config.validate();
}

ServiceConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    ServiceConfig cfg;
    try {
        cfg = parse_config(text.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    apply_env_overrides(cfg, env);
    return cfg;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw ConfigError("listen address '" + listen + "' must be host:port");
    }
    int port = -1;
    const std::string port_text = listen.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw ConfigError("listen address '" + listen + "' has an invalid port");
    }
    return {listen.substr(0, colon), port};
}

}  // namespace nss::service
