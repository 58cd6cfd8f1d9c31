#pragma once

// Service configuration: a line-oriented `key = value` text file.
//
//   listen = 127.0.0.1:8161
//   data_dir = /var/lib/nss
//   classes = Normal, Congestion, ErrorBurst, BroadcastStorm
//   class.Normal.color = #2e7d32
//   class.Normal.strategy = no action
//   unidentified.strategy = investigate
//   target.core1.host = 10.0.0.1
//   target.core1.if_indexes = 1, 2
//
// See README.md for the full key list.

#include "nss/classifier/potential.hpp"
#include "nss/snmp/poller.hpp"
#include "nss/snmp/scheduler.hpp"
#include "nss/snmp/target.hpp"
#include "nss/store/history.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nss::service {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ClassSpec {
    classifier::ClassLabel label;
    std::string color;
    std::string strategy;
};

struct ServiceConfig {
    std::string listen = "127.0.0.1:8161";
    std::filesystem::path data_dir = "nss-data";
    /// Ids follow the order of the `classes` key.
    std::vector<ClassSpec> classes;
    std::string unidentified_strategy = "investigate";
    std::string unidentified_color = "#9e9e9e";
    classifier::TrainParams train;
    classifier::KernelParams kernel;
    std::vector<std::string> feature_order;
    bool online_reorg = false;
    std::vector<snmp::Target> targets;
    std::optional<std::string> api_token;
    std::optional<std::filesystem::path> ui_dir;
    snmp::SchedulerOptions scheduler;
    snmp::PollOptions poll;
    store::HistoryOptions history;
    /// Snapshots buffered between the pollers and the pipeline.
    std::size_t ingest_queue = 4096;
    /// Events buffered per stream subscriber before the oldest are dropped.
    std::size_t subscriber_queue = 1024;

    ServiceConfig();

    /// Throws ConfigError naming the first violated rule.
    void validate() const;
    std::vector<classifier::ClassLabel> class_labels() const;
    const ClassSpec* find_class(std::string_view name) const;
    /// Strategy for a class name or "Unidentified"; nullopt for unknown names.
    std::optional<std::string> strategy_for(std::string_view label) const;
};

/// Parses and validates. Errors name the offending line.
ServiceConfig parse_config(std::string_view text);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
EnvLookup process_env();

/// NSS_LISTEN and NSS_DATA_DIR replace the file values.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& env);

ServiceConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

/// Host and port of a `host:port` listen address.
std::pair<std::string, int> split_listen(const std::string& listen);

}  // namespace nss::service
