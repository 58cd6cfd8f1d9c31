#pragma once

#include "nss/classifier/potential.hpp"
#include "nss/store/canonical_json.hpp"

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace nss::store {

inline constexpr int kArtifactSchemaVersion = 1;

/// A self-contained trained model: classifier state, normalizer and feature
/// order (inside model.norm), provenance and a free-form training report.
struct ModelArtifact {
    classifier::PotentialModel model;
    std::int64_t created_at_ms = 0;
    /// SHA-256 over the canonical form of the training samples.
    std::string fingerprint;
    int schema_version = kArtifactSchemaVersion;
    nlohmann::json report = nlohmann::json::object();

    const std::vector<std::string>& feature_order() const { return model.norm.feature_order; }
    friend bool operator==(const ModelArtifact&, const ModelArtifact&) = default;
};

struct ModelInfo {
    std::string id;
    std::int64_t created_at_ms = 0;
    std::string fingerprint;
    std::vector<classifier::ClassLabel> classes;
    std::size_t stored_vectors = 0;
    bool active = false;
};

nlohmann::json to_json(const classifier::FeatureVector& v);
classifier::FeatureVector feature_vector_from_json(const nlohmann::json& j);
nlohmann::json to_json(const classifier::StateDecision& d);
classifier::StateDecision decision_from_json(const nlohmann::json& j);
nlohmann::json to_json(const NormParams& n);
NormParams norm_from_json(const nlohmann::json& j);
nlohmann::json to_json(const classifier::PotentialModel& m);
classifier::PotentialModel model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelArtifact& a);
ModelArtifact artifact_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelInfo& info);

/// Stable hash of a training set: vectors bit-exact, labels by id and name.
std::string training_fingerprint(std::span<const classifier::TrainingSample> samples);

/// Model file bytes: one header line `NSSMODEL <schema> sha256=<hex> bytes=<n>`
/// followed by the canonical JSON payload. Zero-weight vectors are pruned.
std::string serialize_artifact(const ModelArtifact& artifact);
/// Throws ChecksumError on any truncation or corruption and SchemaError on a
/// newer schema; never returns a partial model.
ModelArtifact parse_artifact(std::string_view bytes);
/// Content-derived id of serialized model bytes.
std::string model_id_for(std::string_view serialized);

/// Directory of model files plus an ACTIVE pointer. Single writer.
class ModelStore {
public:
    explicit ModelStore(std::filesystem::path dir);

    /// Idempotent: saving an identical artifact returns the same id.
    std::string save(const ModelArtifact& artifact);
    ModelArtifact load(const std::string& id) const;
    bool contains(const std::string& id) const;
    /// Newest first.
    std::vector<ModelInfo> list() const;

    void activate(const std::string& id);
    std::optional<std::string> active_id() const;

    /// Copies the model file verbatim.
    void export_model(const std::string& id, const std::filesystem::path& out) const;
    /// Verifies and stores a model file; returns its id. Does not activate.
    std::string import_model(const std::filesystem::path& in);

private:
    std::filesystem::path file_for(const std::string& id) const;

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

}  // namespace nss::store
