#pragma once

// The daemon core: scheduler -> ingest queue -> pipeline -> classifier ->
// history, with live state, operator labels, training and model switching.

#include "nss/common/clock.hpp"
#include "nss/features/pipeline.hpp"
#include "nss/service/config.hpp"
#include "nss/service/events.hpp"
#include "nss/snmp/scheduler.hpp"
#include "nss/store/history.hpp"
#include "nss/store/model_store.hpp"
#include "nss/store/samples.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

namespace nss::service {

/// Error with an HTTP-style status and a stable machine-readable code.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }

private:
    int status_;
    std::string code_;
};

struct ActiveModel {
    std::string id;
    store::ModelArtifact artifact;
};

struct StreamState {
    snmp::StreamKey key;
    /// "pending" until the first poll, then "ok", "degraded" or "unreachable".
    std::string health = "pending";
    std::optional<classifier::StateDecision> decision;
    std::optional<std::string> label;
    std::optional<std::string> recommended_strategy;
    std::optional<features::RateVector> rates;
    std::optional<std::string> model_id;
    std::optional<std::uint64_t> record_id;
    std::int64_t updated_ms = 0;
    std::optional<std::string> last_error;
};

nlohmann::json to_json(const StreamState& s);

struct TrainRequest {
    std::optional<double> delta;
    std::optional<double> alpha;
    std::optional<double> epsilon;
    std::optional<int> max_passes;
    std::optional<classifier::UpdateVariant> variant;
};

/// Throws ServiceError(400) on unknown keys or wrong types.
TrainRequest train_request_from_json(const nlohmann::json& j);

struct TrainingStatus {
    /// "idle" or "running".
    std::string state = "idle";
    std::optional<std::int64_t> started_at_ms;
    nlohmann::json last_report;  // null until a run finishes
    std::optional<std::string> last_error;
};

nlohmann::json to_json(const TrainingStatus& s);

struct ServiceOptions {
    std::shared_ptr<const Clock> clock = system_clock();
    /// Replaces SNMP polling, for tests and replays.
    snmp::PollFn poll;
};

class Service {
public:
    explicit Service(ServiceConfig config, ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Starts the pipeline thread and the poll scheduler.
    void start();
    void stop();

    const ServiceConfig& config() const { return config_; }
    EventBus& events() { return events_; }
    const Clock& clock() const { return *clock_; }

    /// Scheduler sink. Snapshots wait for room in the bounded ingest queue so
    /// no history is lost; failures are dropped when the queue is full.
    void submit(const snmp::PollEvent& event);
    /// Blocks until everything submitted so far has been processed.
    void drain();

    /// Pairs, classifies, appends to history and updates live state. Returns
    /// the stored record, or nullopt when the snapshot only set a baseline.
    std::optional<store::StateRecord> process_snapshot(const features::CounterSnapshot& snapshot);
    void process_failure(const snmp::PollFailure& failure);

    std::vector<StreamState> live_state() const;
    nlohmann::json state_json() const;
    std::shared_ptr<const ActiveModel> active_model() const;

    std::vector<snmp::Target> targets() const;
    /// Creates or replaces by id. Returns true when the id was new.
    bool upsert_target(const snmp::Target& target);
    bool remove_target(const std::string& id);

    store::HistoryPage history(const store::HistoryQuery& query) const;
    std::optional<store::StateRecord> record(std::uint64_t id) const;

    /// Stores the record's raw features under `label`; replaces any earlier
    /// label of the same record. Never retrains.
    store::LabeledSample label_record(std::uint64_t record_id, const std::string& label);
    store::LabeledSample add_sample(store::LabeledSample sample);
    std::vector<store::LabeledSample> samples() const;

    /// Refits the normalizer and runs both training stages on every stored
    /// sample, then activates the result. Single-flight.
    nlohmann::json trigger_training(const TrainRequest& request);
    TrainingStatus training_status() const;

    std::vector<store::ModelInfo> models() const;
    store::ModelInfo activate_model(const std::string& id);
    /// Full description of the active model, or null.
    nlohmann::json model_json() const;
    nlohmann::json classes_json() const;

private:
    using Key = snmp::StreamKey;
    struct StreamPipeline {
        features::StreamCursor cursor;
    };

    void pipeline_loop();
    void install_model(std::shared_ptr<const ActiveModel> model);
    void update_live(const Key& key, const std::function<void(StreamState&)>& change);
    void sync_live_streams();
    void persist_targets() const;

    ServiceConfig config_;
    std::shared_ptr<const Clock> clock_;
    EventBus events_;
    store::ModelStore models_;
    store::HistoryStore history_;
    store::SampleStore samples_;
    std::unique_ptr<snmp::PollScheduler> scheduler_;

    mutable std::mutex model_mutex_;
    std::shared_ptr<const ActiveModel> active_;

    std::mutex pipeline_mutex_;
    std::map<Key, StreamPipeline> pipelines_;

    mutable std::mutex live_mutex_;
    std::map<Key, StreamState> live_;

    mutable std::mutex targets_mutex_;
    std::vector<snmp::Target> targets_;

    mutable std::mutex training_mutex_;
    std::atomic<bool> training_running_{false};
    TrainingStatus training_;

    std::mutex ingest_mutex_;
    std::condition_variable ingest_not_empty_;
    std::condition_variable ingest_not_full_;
    std::condition_variable ingest_idle_;
    std::deque<snmp::PollEvent> ingest_;
    std::size_t ingest_busy_ = 0;
    bool stopping_ = false;
    std::thread pipeline_thread_;
};

}  // namespace nss::service
