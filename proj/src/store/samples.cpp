#include "nss/store/samples.hpp"

#include <algorithm>

namespace nss::store {

using nlohmann::json;

json to_json(const LabeledSample& s) {
    return json{
        {"raw_features", s.raw_features},
        {"feature_order", s.feature_order},
        {"label", json{{"id", s.label.id}, {"name", s.label.name}}},
        {"record_id", s.record_id ? json(*s.record_id) : json(nullptr)},
        {"source_id", s.source_id ? json(*s.source_id) : json(nullptr)},
    };
}

LabeledSample labeled_sample_from_json(const json& j) {
    try {
        LabeledSample s;
        s.raw_features = j.at("raw_features").get<std::vector<double>>();
        s.feature_order = j.at("feature_order").get<std::vector<std::string>>();
        s.label.id = j.at("label").at("id").get<classifier::ClassId>();
        s.label.name = j.at("label").at("name").get<std::string>();
        if (j.contains("record_id") && !j.at("record_id").is_null()) {
            s.record_id = j.at("record_id").get<std::uint64_t>();
        }
        if (j.contains("source_id") && !j.at("source_id").is_null()) {
            s.source_id = j.at("source_id").get<std::string>();
        }
        return s;
    } catch (const json::exception& e) {
        throw StoreError(std::string("invalid labeled sample: ") + e.what());
    }
}

SampleStore::SampleStore(std::filesystem::path file, std::vector<classifier::ClassLabel> classes)
    : file_(std::move(file)), classes_(std::move(classes)) {
    if (!std::filesystem::exists(file_)) {
        return;
    }
    json doc;
    try {
        doc = json::parse(read_file(file_));
    } catch (const json::parse_error& e) {
        throw StoreError("corrupt sample file " + file_.string() + ": " + e.what());
    }
    if (!doc.contains("samples") || !doc.at("samples").is_array()) {
        throw StoreError("sample file " + file_.string() + " has no samples array");
    }
    for (const auto& item : doc.at("samples")) {
        samples_.push_back(labeled_sample_from_json(item));
    }
}

LabeledSample SampleStore::put(LabeledSample sample) {
    const auto cls = std::find_if(classes_.begin(), classes_.end(),
                                  [&](const classifier::ClassLabel& c) { return c.name == sample.label.name; });
    if (cls == classes_.end()) {
        throw StoreError("unknown class label: " + sample.label.name);
    }
    sample.label = *cls;
    if (sample.raw_features.size() != sample.feature_order.size()) {
        throw StoreError("sample has " + std::to_string(sample.raw_features.size()) + " values for " +
                         std::to_string(sample.feature_order.size()) + " feature names");
    }

    std::lock_guard lock(mutex_);
    if (sample.record_id) {
        const auto it = std::find_if(samples_.begin(), samples_.end(),
                                     [&](const LabeledSample& s) { return s.record_id == sample.record_id; });
        if (it != samples_.end()) {
            if (*it == sample) {
                return sample;
            }
            *it = sample;
            persist();
            return sample;
        }
    }
    const auto same = std::find_if(samples_.begin(), samples_.end(), [&](const LabeledSample& s) {
        return s.raw_features == sample.raw_features && s.feature_order == sample.feature_order &&
               s.label == sample.label && s.record_id == sample.record_id;
    });
    if (same != samples_.end()) {
        return *same;
    }
    samples_.push_back(sample);
    persist();
    return sample;
}

std::vector<LabeledSample> SampleStore::list() const {
    std::lock_guard lock(mutex_);
    return samples_;
}

std::size_t SampleStore::size() const {
    std::lock_guard lock(mutex_);
    return samples_.size();
}

void SampleStore::persist() const {
    json items = json::array();
    for (const auto& s : samples_) {
        items.push_back(to_json(s));
    }
    atomic_write_file(file_, canonical_dump(json{{"samples", items}}) + "\n");
}

}  // namespace nss::store
