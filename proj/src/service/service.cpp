#include "nss/service/service.hpp"

#include "nss/features/trace_io.hpp"
#include "nss/service/training.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <set>

namespace nss::service {

namespace cls = nss::classifier;
using nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

json rates_json(const features::RateVector& r) {
    json feats = json::object();
    for (auto name : features::kFeatureNames) {
        feats[std::string(name)] = *r.feature(name);
    }
    return json{{"interval_s", r.interval_s}, {"counters", r.rates}, {"features", feats}};
}

json model_summary(const ActiveModel& m) {
    json classes = json::array();
    for (const auto& c : m.artifact.model.classes) classes.push_back(c.name);
    return json{
        {"id", m.id},
        {"created_at_ms", m.artifact.created_at_ms},
        {"fingerprint", m.artifact.fingerprint},
        {"classes", classes},
        {"stored_vectors", m.artifact.model.weighted.size()},
    };
}

}  // namespace

json to_json(const StreamState& s) {
    return json{
        {"target", s.key.target_id},
        {"if_index", s.key.if_index},
        {"health", s.health},
        {"decision", s.decision ? store::to_json(*s.decision) : json(nullptr)},
        {"label", optional_json(s.label)},
        {"recommended_strategy", optional_json(s.recommended_strategy)},
        {"rates", s.rates ? rates_json(*s.rates) : json(nullptr)},
        {"model_id", optional_json(s.model_id)},
        {"record_id", optional_json(s.record_id)},
        {"updated_ms", s.updated_ms},
        {"last_error", optional_json(s.last_error)},
    };
}

TrainRequest train_request_from_json(const json& j) {
    if (j.is_null()) return {};
    if (!j.is_object()) throw ServiceError(400, "invalid_request", "training request must be a JSON object");
    TrainRequest r;
    auto number = [&](const std::string& key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        if (!j.at(key).is_number()) throw ServiceError(400, "invalid_request", key + " must be a number");
        return j.at(key).get<double>();
    };
    for (const auto& [key, value] : j.items()) {
        static const std::set<std::string> known{"delta", "alpha", "epsilon", "max_passes", "variant"};
        if (!known.count(key)) throw ServiceError(400, "invalid_request", "unknown training parameter " + key);
    }
    r.delta = number("delta");
    r.alpha = number("alpha");
    r.epsilon = number("epsilon");
    if (const auto p = number("max_passes")) {
        if (*p != static_cast<int>(*p)) throw ServiceError(400, "invalid_request", "max_passes must be an integer");
        r.max_passes = static_cast<int>(*p);
    }
    if (j.contains("variant") && !j.at("variant").is_null()) {
        const auto& v = j.at("variant");
        if (v == "a" || v == "A") {
            r.variant = cls::UpdateVariant::A;
        } else if (v == "b" || v == "B") {
            r.variant = cls::UpdateVariant::B;
        } else {
            throw ServiceError(400, "invalid_request", "variant must be \"a\" or \"b\"");
        }
    }
    return r;
}

json to_json(const TrainingStatus& s) {
    return json{
        {"state", s.state},
        {"started_at_ms", optional_json(s.started_at_ms)},
        {"last_report", s.last_report},
        {"last_error", optional_json(s.last_error)},
    };
}

Service::Service(ServiceConfig config, ServiceOptions options)
    : config_(std::move(config)),
      clock_(std::move(options.clock)),
      events_(config_.subscriber_queue),
      models_(config_.data_dir / "models"),
      history_(config_.data_dir / "history", config_.history),
      samples_(config_.data_dir / "samples.json", config_.class_labels()) {
    config_.validate();

    targets_ = config_.targets;
    const auto targets_file = config_.data_dir / "targets.json";
    if (std::filesystem::exists(targets_file)) {
        try {
            targets_.clear();
            const json doc = json::parse(store::read_file(targets_file));
            for (const auto& t : doc.at("targets")) {
                targets_.push_back(snmp::target_from_json(t));
            }
        } catch (const std::exception& e) {
            throw ServiceError(500, "corrupt_targets", targets_file.string() + ": " + e.what());
        }
    }

    if (const auto id = models_.active_id()) {
        install_model(std::make_shared<ActiveModel>(ActiveModel{*id, models_.load(*id)}));
    }

    snmp::PollFn poll = options.poll;
    if (!poll) {
        poll = snmp::make_snmp_poll_fn(std::make_shared<snmp::SnmpPoller>(clock_), config_.poll);
    }
    scheduler_ = std::make_unique<snmp::PollScheduler>(
        std::move(poll), [this](const snmp::PollEvent& e) { submit(e); }, clock_, config_.scheduler);
    scheduler_->set_targets(targets_);
    sync_live_streams();
}

Service::~Service() {
    stop();
}

void Service::start() {
    {
        std::lock_guard lock(ingest_mutex_);
        if (pipeline_thread_.joinable()) return;
        stopping_ = false;
    }
    pipeline_thread_ = std::thread([this] { pipeline_loop(); });
    scheduler_->start();
}

void Service::stop() {
    if (scheduler_) scheduler_->stop();
    {
        std::lock_guard lock(ingest_mutex_);
        stopping_ = true;
    }
    ingest_not_empty_.notify_all();
    ingest_not_full_.notify_all();
    if (pipeline_thread_.joinable()) pipeline_thread_.join();
    events_.close();
}

void Service::submit(const snmp::PollEvent& event) {
    std::unique_lock lock(ingest_mutex_);
    if (std::holds_alternative<snmp::PollFailure>(event)) {
        if (ingest_.size() >= config_.ingest_queue) return;
    } else {
        ingest_not_full_.wait(lock, [this] { return ingest_.size() < config_.ingest_queue || stopping_; });
        if (stopping_) return;
    }
    ingest_.push_back(event);
    lock.unlock();
    ingest_not_empty_.notify_one();
}

void Service::drain() {
    std::unique_lock lock(ingest_mutex_);
    ingest_idle_.wait(lock, [this] { return (ingest_.empty() && ingest_busy_ == 0) || !pipeline_thread_.joinable(); });
}

void Service::pipeline_loop() {
    for (;;) {
        snmp::PollEvent event;
        {
            std::unique_lock lock(ingest_mutex_);
            ingest_not_empty_.wait(lock, [this] { return !ingest_.empty() || stopping_; });
            if (ingest_.empty()) {
                ingest_idle_.notify_all();
                return;
            }
            event = std::move(ingest_.front());
            ingest_.pop_front();
            ++ingest_busy_;
        }
        ingest_not_full_.notify_one();
        try {
            if (const auto* snap = std::get_if<snmp::SnapshotEvent>(&event)) {
                process_snapshot(snap->snapshot);
            } else {
                process_failure(std::get<snmp::PollFailure>(event));
            }
        } catch (const std::exception& e) {
            std::cerr << "nss: pipeline error: " << e.what() << "\n";
        }
        {
            std::lock_guard lock(ingest_mutex_);
            --ingest_busy_;
        }
        ingest_idle_.notify_all();
    }
}

std::optional<store::StateRecord> Service::process_snapshot(const features::CounterSnapshot& snapshot) {
    std::lock_guard pipeline_lock(pipeline_mutex_);
    const Key key{snapshot.target_id, snapshot.if_index};
    const std::string health = snapshot.degraded() ? "degraded" : "ok";

    features::StreamCursor::Output out;
    try {
        out = pipelines_[key].cursor.push(snapshot);
    } catch (const features::FeatureError& e) {
        update_live(key, [&](StreamState& s) {
            s.health = health;
            s.last_error = e.what();
            s.updated_ms = snapshot.ts_ms;
        });
        return std::nullopt;
    }
    const auto* rates = std::get_if<features::RateVector>(&out);
    if (rates == nullptr) {
        const bool reset = std::holds_alternative<features::CounterReset>(out);
        update_live(key, [&](StreamState& s) {
            s.health = health;
            s.last_error = reset ? std::optional<std::string>("counter reset; waiting for a new baseline")
                                 : std::nullopt;
            s.updated_ms = snapshot.ts_ms;
        });
        return std::nullopt;
    }

    const auto model = active_model();
    store::StateRecord rec;
    rec.target_id = snapshot.target_id;
    rec.if_index = snapshot.if_index;
    rec.ts_ms = snapshot.ts_ms;
    try {
        if (model) {
            const auto& m = model->artifact.model;
            rec.feature_order = m.norm.feature_order;
            rec.raw_features = rates->features(rec.feature_order);
            const auto vec = features::normalize_values(rec.raw_features, m.norm);
            auto decision = cls::classify(m, vec, snapshot.ts_ms);
            rec.label = decision.label ? m.class_name(*decision.label) : std::string(store::kUnidentifiedLabel);
            rec.recommended_strategy = config_.strategy_for(*rec.label);
            if (!rec.recommended_strategy) rec.recommended_strategy = config_.unidentified_strategy;
            rec.features.assign(vec.values().begin(), vec.values().end());
            rec.decision = std::move(decision);
            rec.model_id = model->id;
            if (config_.online_reorg) {
                const std::vector<cls::FeatureVector> one{vec};
                auto online = cls::recognize_online(m, one, snapshot.ts_ms);
                auto next = std::make_shared<ActiveModel>(ActiveModel{model->id, model->artifact});
                next->artifact.model = std::move(online.model);
                std::lock_guard lock(model_mutex_);
                // A model installed meanwhile by training or activation wins.
                if (active_ == model) active_ = std::move(next);
            }
        } else {
            rec.feature_order = config_.feature_order;
            rec.raw_features = rates->features(rec.feature_order);
        }
    } catch (const std::exception& e) {
        update_live(key, [&](StreamState& s) {
            s.health = health;
            s.last_error = std::string("classification failed: ") + e.what();
            s.updated_ms = snapshot.ts_ms;
        });
        return std::nullopt;
    }

    try {
        rec = history_.append(std::move(rec));
    } catch (const store::StoreError& e) {
        update_live(key, [&](StreamState& s) {
            s.health = health;
            s.last_error = std::string("history append failed: ") + e.what();
            s.updated_ms = snapshot.ts_ms;
        });
        throw;
    }
    events_.publish("record", store::to_json(rec));
    update_live(key, [&](StreamState& s) {
        s.health = health;
        s.decision = rec.decision;
        s.label = rec.label;
        s.recommended_strategy = rec.recommended_strategy;
        s.rates = *rates;
        s.model_id = rec.model_id;
        s.record_id = rec.id;
        s.updated_ms = snapshot.ts_ms;
        s.last_error.reset();
    });
    return rec;
}

void Service::process_failure(const snmp::PollFailure& failure) {
    update_live(failure.stream, [&](StreamState& s) {
        s.health = failure.kind == "unreachable" ? "unreachable" : "degraded";
        s.last_error = failure.kind + ": " + failure.message;
        s.updated_ms = failure.ts_ms;
    });
}

void Service::update_live(const Key& key, const std::function<void(StreamState&)>& change) {
    json event;
    {
        std::lock_guard lock(live_mutex_);
        auto [it, inserted] = live_.try_emplace(key);
        if (inserted) it->second.key = key;
        change(it->second);
        event = to_json(it->second);
    }
    events_.publish("state", std::move(event));
}

void Service::sync_live_streams() {
    std::set<Key> wanted;
    for (const auto& t : targets()) {
        for (int idx : t.if_indexes) wanted.insert(Key{t.id, idx});
    }
    std::lock_guard lock(live_mutex_);
    for (auto it = live_.begin(); it != live_.end();) {
        it = wanted.count(it->first) ? std::next(it) : live_.erase(it);
    }
    for (const auto& key : wanted) {
        auto [it, inserted] = live_.try_emplace(key);
        if (inserted) it->second.key = key;
    }
}

std::vector<StreamState> Service::live_state() const {
    std::lock_guard lock(live_mutex_);
    std::vector<StreamState> out;
    for (const auto& [key, s] : live_) out.push_back(s);
    return out;
}

json Service::state_json() const {
    json streams = json::array();
    for (const auto& s : live_state()) streams.push_back(to_json(s));
    const auto model = active_model();
    return json{
        {"model", model ? model_summary(*model) : json(nullptr)},
        {"online_reorg", config_.online_reorg},
        {"training", to_json(training_status())},
        {"streams", streams},
    };
}

std::shared_ptr<const ActiveModel> Service::active_model() const {
    std::lock_guard lock(model_mutex_);
    return active_;
}

void Service::install_model(std::shared_ptr<const ActiveModel> model) {
    std::lock_guard lock(model_mutex_);
    active_ = std::move(model);
}

std::vector<snmp::Target> Service::targets() const {
    std::lock_guard lock(targets_mutex_);
    return targets_;
}

bool Service::upsert_target(const snmp::Target& target) {
    try {
        target.validate();
    } catch (const std::exception& e) {
        throw ServiceError(400, "invalid_target", e.what());
    }
    bool created = false;
    {
        std::lock_guard lock(targets_mutex_);
        auto it = std::find_if(targets_.begin(), targets_.end(), [&](const snmp::Target& t) { return t.id == target.id; });
        if (it == targets_.end()) {
            targets_.push_back(target);
            created = true;
        } else {
            *it = target;
        }
        persist_targets();
        scheduler_->set_targets(targets_);
    }
    sync_live_streams();
    return created;
}

bool Service::remove_target(const std::string& id) {
    {
        std::lock_guard lock(targets_mutex_);
        const auto before = targets_.size();
        std::erase_if(targets_, [&](const snmp::Target& t) { return t.id == id; });
        if (targets_.size() == before) return false;
        persist_targets();
        scheduler_->set_targets(targets_);
    }
    {
        std::lock_guard lock(pipeline_mutex_);
        std::erase_if(pipelines_, [&](const auto& p) { return p.first.target_id == id; });
    }
    sync_live_streams();
    return true;
}

void Service::persist_targets() const {
    json arr = json::array();
    for (const auto& t : targets_) arr.push_back(snmp::to_json(t));
    store::atomic_write_file(config_.data_dir / "targets.json", store::canonical_dump(json{{"targets", arr}}) + "\n");
}

store::HistoryPage Service::history(const store::HistoryQuery& query) const {
    return history_.query(query);
}

std::optional<store::StateRecord> Service::record(std::uint64_t id) const {
    return history_.get(id);
}

store::LabeledSample Service::label_record(std::uint64_t record_id, const std::string& label) {
    const auto rec = history_.get(record_id);
    if (!rec) {
        throw ServiceError(404, "record_not_found", "no record " + std::to_string(record_id));
    }
    const auto* cls = config_.find_class(label);
    if (cls == nullptr) {
        throw ServiceError(400, "unknown_label", "label '" + label + "' is not in the class set");
    }
    if (rec->raw_features.empty()) {
        throw ServiceError(409, "no_features", "record " + std::to_string(record_id) + " has no feature values");
    }
    store::LabeledSample sample{rec->raw_features, rec->feature_order, cls->label, record_id,
                                "record:" + std::to_string(record_id)};
    return samples_.put(std::move(sample));
}

store::LabeledSample Service::add_sample(store::LabeledSample sample) {
    if (config_.find_class(sample.label.name) == nullptr) {
        throw ServiceError(400, "unknown_label", "label '" + sample.label.name + "' is not in the class set");
    }
    try {
        return samples_.put(std::move(sample));
    } catch (const store::StoreIoError&) {
        throw;
    } catch (const store::StoreError& e) {
        throw ServiceError(400, "invalid_sample", e.what());
    }
}

std::vector<store::LabeledSample> Service::samples() const {
    return samples_.list();
}

json Service::trigger_training(const TrainRequest& request) {
    bool expected = false;
    if (!training_running_.compare_exchange_strong(expected, true)) {
        throw ServiceError(409, "training_in_progress", "training in progress");
    }
    struct Release {
        std::atomic<bool>& flag;
        ~Release() { flag = false; }
    } release{training_running_};

    const auto started = std::chrono::steady_clock::now();
    {
        std::lock_guard lock(training_mutex_);
        training_.state = "running";
        training_.started_at_ms = clock_->now_ms();
        training_.last_error.reset();
    }
    events_.publish("training", json{{"phase", "started"}});

    auto fail = [this](const std::string& message) {
        {
            std::lock_guard lock(training_mutex_);
            training_.state = "idle";
            training_.last_error = message;
        }
        events_.publish("training", json{{"phase", "failed"}, {"message", message}});
    };

    try {
        cls::TrainParams params = config_.train;
        cls::KernelParams kernel = config_.kernel;
        if (request.delta) params.delta = *request.delta;
        if (request.epsilon) params.epsilon = *request.epsilon;
        if (request.max_passes) params.max_passes = *request.max_passes;
        if (request.variant) params.variant = *request.variant;
        if (request.alpha) kernel.alpha = *request.alpha;
        try {
            cls::validate(params);
            cls::validate(kernel);
        } catch (const cls::ClassifierError& e) {
            throw ServiceError(400, "invalid_request", e.what());
        }

        // Model class ids are dense over the classes that have samples, in
        // class-set order.
        const auto stored = samples_.list();
        std::map<cls::ClassId, std::size_t> counts;
        for (const auto& s : stored) ++counts[s.label.id];
        if (counts.size() < 2) {
            throw ServiceError(409, "insufficient_classes",
                               "need >= 2 classes among labeled samples, have " + std::to_string(counts.size()));
        }
        std::map<cls::ClassId, cls::ClassLabel> dense;
        for (const auto& [id, n] : counts) {
            dense.emplace(id, cls::ClassLabel{static_cast<cls::ClassId>(dense.size()), config_.classes.at(id).label.name});
        }

        const auto& order = config_.feature_order;
        std::vector<std::vector<double>> rows;
        for (const auto& s : stored) {
            std::vector<double> row;
            for (const auto& name : order) {
                const auto at = std::find(s.feature_order.begin(), s.feature_order.end(), name);
                if (at == s.feature_order.end()) {
                    throw ServiceError(422, "feature_mismatch", "a labeled sample has no value for feature " + name);
                }
                row.push_back(s.raw_features[static_cast<std::size_t>(at - s.feature_order.begin())]);
            }
            rows.push_back(std::move(row));
        }
        TrainingInput input;
        input.rows = std::move(rows);
        input.feature_order = order;
        for (const auto& s : stored) {
            input.labels.push_back(dense.at(s.label.id));
            input.source_ids.push_back(s.source_id);
        }
        int last_pass = 0;
        TrainingHooks hooks;
        hooks.stage1 = [&](const cls::Stage1Step& step) {
            if (step.pass != last_pass) {
                last_pass = step.pass;
                events_.publish("training", json{{"phase", "stage1"}, {"pass", step.pass}});
            }
        };
        hooks.stage2_started = [&] { events_.publish("training", json{{"phase", "stage2"}}); };
        auto [artifact, report] = train_model(input, params, kernel, clock_->now_ms(), hooks);
        const std::string id = models_.save(artifact);
        models_.activate(id);
        install_model(std::make_shared<ActiveModel>(ActiveModel{id, models_.load(id)}));

        report["model_id"] = id;
        report["duration_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        {
            std::lock_guard lock(training_mutex_);
            training_.state = "idle";
            training_.last_report = report;
        }
        events_.publish("training", json{{"phase", "finished"}, {"report", report}});
        return report;
    } catch (const ServiceError& e) {
        fail(e.what());
        throw;
    } catch (const std::exception& e) {
        fail(e.what());
        throw ServiceError(500, "training_failed", e.what());
    }
}

TrainingStatus Service::training_status() const {
    std::lock_guard lock(training_mutex_);
    return training_;
}

std::vector<store::ModelInfo> Service::models() const {
    return models_.list();
}

store::ModelInfo Service::activate_model(const std::string& id) {
    if (!models_.contains(id)) {
        throw ServiceError(404, "model_not_found", "no model " + id);
    }
    auto artifact = models_.load(id);
    models_.activate(id);
    install_model(std::make_shared<ActiveModel>(ActiveModel{id, std::move(artifact)}));
    for (const auto& info : models_.list()) {
        if (info.id == id) return info;
    }
    throw ServiceError(500, "internal", "activated model vanished");
}

json Service::model_json() const {
    const auto model = active_model();
    if (!model) return nullptr;
    const auto& m = model->artifact.model;
    json out = model_summary(*model);
    out["feature_order"] = m.norm.feature_order;
    out["norm"] = store::to_json(m.norm);
    out["kernel"] = {{"alpha", m.kernel.alpha}};
    out["epsilon"] = m.epsilon;
    out["memory"] = m.memory.size();
    out["report"] = model->artifact.report;
    return out;
}

json Service::classes_json() const {
    json classes = json::array();
    for (const auto& c : config_.classes) {
        classes.push_back({{"id", c.label.id}, {"name", c.label.name}, {"color", c.color}, {"strategy", c.strategy}});
    }
    return json{
        {"classes", classes},
        {"unidentified",
         {{"name", store::kUnidentifiedLabel}, {"color", config_.unidentified_color},
          {"strategy", config_.unidentified_strategy}}},
        {"feature_order", config_.feature_order},
    };
}

}  // namespace nss::service
