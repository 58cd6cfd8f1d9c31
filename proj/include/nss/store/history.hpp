#pragma once

#include "nss/classifier/potential.hpp"
#include "nss/store/canonical_json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nss::store {

inline constexpr std::string_view kUnidentifiedLabel = "Unidentified";

struct StateRecord {
    std::uint64_t id = 0;  // assigned by the store
    std::string target_id;
    int if_index = 0;
    std::int64_t ts_ms = 0;
    /// Null while no model is active.
    std::optional<classifier::StateDecision> decision;
    /// Class name, "Unidentified", or null when there is no decision.
    std::optional<std::string> label;
    /// Normalized vector the decision was made on; empty without a model.
    std::vector<double> features;
    /// Un-normalized features in `feature_order`.
    std::vector<double> raw_features;
    std::vector<std::string> feature_order;
    std::optional<std::string> recommended_strategy;
    std::optional<std::string> model_id;

    friend bool operator==(const StateRecord&, const StateRecord&) = default;
};

nlohmann::json to_json(const StateRecord& r);
StateRecord state_record_from_json(const nlohmann::json& j);

struct HistoryQuery {
    std::optional<std::string> target_id;
    std::optional<int> if_index;
    /// Inclusive bounds on ts_ms.
    std::optional<std::int64_t> from_ms;
    std::optional<std::int64_t> to_ms;
    /// Class name or "Unidentified".
    std::optional<std::string> label;
    std::size_t offset = 0;
    std::size_t limit = 100;
};

struct HistoryPage {
    std::vector<StateRecord> records;
    /// Matching records before paging.
    std::size_t total = 0;
};

struct HistoryOptions {
    std::size_t records_per_segment = 10'000;
    /// Oldest whole segments are dropped once the count exceeds this.
    std::size_t max_records = 1'000'000;
};

/// Append-only JSON Lines log split into numbered segment files, with an
/// in-memory index of offsets. Appends are fsynced before returning. On open,
/// a torn final line (an unacknowledged write) is truncated away.
class HistoryStore {
public:
    explicit HistoryStore(std::filesystem::path dir, HistoryOptions options = {});
    ~HistoryStore();
    HistoryStore(const HistoryStore&) = delete;
    HistoryStore& operator=(const HistoryStore&) = delete;

    /// Assigns the id and returns the stored record. Throws StoreError if the
    /// timestamp goes backwards within its stream, StoreIoError on I/O failure.
    StateRecord append(StateRecord record);
    /// Records ordered by (ts_ms, insertion order).
    HistoryPage query(const HistoryQuery& q) const;
    std::optional<StateRecord> get(std::uint64_t id) const;
    std::size_t size() const;
    std::size_t segment_count() const;

private:
    struct IndexEntry {
        std::uint64_t id;
        std::int64_t ts_ms;
        std::uint32_t stream;
        std::uint32_t label;  // index into labels_, 0 = no decision
        std::uint32_t segment;
        std::uint64_t offset;
        std::uint32_t length;
    };

    void load();
    void open_active_segment();
    void prune();
    std::filesystem::path segment_path(std::uint32_t n) const;
    StateRecord read_entry(const IndexEntry& e) const;
    std::uint32_t stream_index(const std::string& target, int if_index);
    std::uint32_t label_index(const std::optional<std::string>& label);

    std::filesystem::path dir_;
    HistoryOptions options_;
    mutable std::mutex mutex_;
    std::vector<IndexEntry> index_;  // insertion order
    std::map<std::pair<std::string, int>, std::uint32_t> streams_;
    std::vector<std::pair<std::string, int>> stream_keys_;
    std::vector<std::int64_t> stream_last_ts_;
    std::vector<std::string> labels_{""};
    std::map<std::uint32_t, std::size_t> segment_counts_;
    std::uint32_t active_segment_ = 0;
    std::uint64_t active_size_ = 0;
    int fd_ = -1;
    std::uint64_t next_id_ = 1;
};

}  // namespace nss::store
