#pragma once

#include "nss/classifier/potential.hpp"
#include "nss/store/canonical_json.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace nss::store {

/// Operator-labeled feature rows, kept un-normalized so a retrain can refit
/// the normalizer.
struct LabeledSample {
    std::vector<double> raw_features;
    std::vector<std::string> feature_order;
    classifier::ClassLabel label;
    /// History record the sample came from, if any. One label per record.
    std::optional<std::uint64_t> record_id;
    std::optional<std::string> source_id;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

nlohmann::json to_json(const LabeledSample& s);
LabeledSample labeled_sample_from_json(const nlohmann::json& j);

/// The whole set lives in one canonical JSON file rewritten atomically.
class SampleStore {
public:
    SampleStore(std::filesystem::path file, std::vector<classifier::ClassLabel> classes);

    /// Throws StoreError for a label outside the class set (matched by name;
    /// the id is taken from the class set). The same row with the same label
    /// is stored once; a sample for an already-labeled record replaces it.
    LabeledSample put(LabeledSample sample);
    std::vector<LabeledSample> list() const;
    std::size_t size() const;
    const std::vector<classifier::ClassLabel>& classes() const { return classes_; }

private:
    void persist() const;

    std::filesystem::path file_;
    std::vector<classifier::ClassLabel> classes_;
    mutable std::mutex mutex_;
    std::vector<LabeledSample> samples_;
};

}  // namespace nss::store
