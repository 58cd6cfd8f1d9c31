#include "nss/store/model_store.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace nss::store {

namespace cls = nss::classifier;
using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "NSSMODEL";
constexpr std::string_view kModelExtension = ".nssm";
constexpr std::string_view kActiveFile = "ACTIVE";

template <typename T>
T field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw StoreError(std::string("field '") + key + "': " + e.what());
    }
}

bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
}

}  // namespace

json to_json(const cls::FeatureVector& v) {
    return json(std::vector<double>(v.values().begin(), v.values().end()));
}

cls::FeatureVector feature_vector_from_json(const json& j) {
    try {
        return cls::FeatureVector(j.get<std::vector<double>>());
    } catch (const json::exception& e) {
        throw StoreError(std::string("feature vector: ") + e.what());
    } catch (const cls::ClassifierError& e) {
        throw StoreError(std::string("feature vector: ") + e.what());
    }
}

json to_json(const cls::StateDecision& d) {
    return json{
        {"label", d.label ? json(*d.label) : json(nullptr)},
        {"potentials", d.potentials},
        {"margin", d.margin},
        {"decided_at_ms", d.decided_at_ms},
    };
}

cls::StateDecision decision_from_json(const json& j) {
    cls::StateDecision d;
    if (!j.at("label").is_null()) d.label = field<cls::ClassId>(j, "label");
    d.potentials = field<std::vector<double>>(j, "potentials");
    d.margin = field<double>(j, "margin");
    d.decided_at_ms = field<std::int64_t>(j, "decided_at_ms");
    return d;
}

json to_json(const NormParams& n) {
    return json{{"feature_order", n.feature_order}, {"mean", n.mean}, {"std_dev", n.std_dev}};
}

NormParams norm_from_json(const json& j) {
    NormParams n;
    n.feature_order = field<std::vector<std::string>>(j, "feature_order");
    n.mean = field<std::vector<double>>(j, "mean");
    n.std_dev = field<std::vector<double>>(j, "std_dev");
    if (n.mean.size() != n.dim() || n.std_dev.size() != n.dim()) {
        throw StoreError("normalizer vectors disagree with feature_order length");
    }
    return n;
}

json to_json(const cls::PotentialModel& m) {
    json classes = json::array();
    for (const auto& c : m.classes) classes.push_back({{"id", c.id}, {"name", c.name}});
    json weighted = json::array();
    for (const auto& w : m.weighted) {
        weighted.push_back({{"vector", to_json(w.vector)}, {"weight", w.weight}, {"owner", w.owner}});
    }
    json memory = json::array();
    for (const auto& r : m.memory) {
        memory.push_back({{"vector", to_json(r.vector)},
                          {"assigned", r.assigned ? json(*r.assigned) : json(nullptr)},
                          {"training", r.training}});
    }
    return json{
        {"schema_version", m.schema_version},
        {"classes", classes},
        {"weighted", weighted},
        {"stage2", {{"S", m.stage2_S}, {"c", m.stage2_c}}},
        {"kernel", {{"alpha", m.kernel.alpha}}},
        {"epsilon", m.epsilon},
        {"norm", to_json(m.norm)},
        {"memory", memory},
        {"memory_limit", m.memory_limit},
    };
}

cls::PotentialModel model_from_json(const json& j) {
    cls::PotentialModel m;
    m.schema_version = field<int>(j, "schema_version");
    if (m.schema_version > cls::kModelSchemaVersion) {
        throw SchemaError("model schema_version " + std::to_string(m.schema_version) + " is newer than supported " +
                          std::to_string(cls::kModelSchemaVersion));
    }
    for (const auto& c : j.at("classes")) {
        m.classes.push_back({field<cls::ClassId>(c, "id"), field<std::string>(c, "name")});
    }
    for (const auto& w : j.at("weighted")) {
        m.weighted.push_back(
            {feature_vector_from_json(w.at("vector")), field<double>(w, "weight"), field<cls::ClassId>(w, "owner")});
    }
    m.stage2_S = field<std::vector<double>>(j.at("stage2"), "S");
    m.stage2_c = field<std::vector<std::int64_t>>(j.at("stage2"), "c");
    m.kernel.alpha = field<double>(j.at("kernel"), "alpha");
    m.epsilon = field<double>(j, "epsilon");
    m.norm = norm_from_json(j.at("norm"));
    for (const auto& r : j.at("memory")) {
        cls::RecognizedVector rv{feature_vector_from_json(r.at("vector")), std::nullopt, field<bool>(r, "training")};
        if (!r.at("assigned").is_null()) rv.assigned = field<cls::ClassId>(r, "assigned");
        m.memory.push_back(std::move(rv));
    }
    m.memory_limit = field<std::size_t>(j, "memory_limit");
    return m;
}

json to_json(const ModelArtifact& a) {
    return json{
        {"schema_version", a.schema_version},
        {"created_at_ms", a.created_at_ms},
        {"fingerprint", a.fingerprint},
        {"model", to_json(a.model)},
        {"report", a.report},
    };
}

ModelArtifact artifact_from_json(const json& j) {
    ModelArtifact a;
    a.schema_version = field<int>(j, "schema_version");
    if (a.schema_version > kArtifactSchemaVersion) {
        throw SchemaError("artifact schema_version " + std::to_string(a.schema_version) +
                          " is newer than supported " + std::to_string(kArtifactSchemaVersion));
    }
    a.created_at_ms = field<std::int64_t>(j, "created_at_ms");
    a.fingerprint = field<std::string>(j, "fingerprint");
    a.model = model_from_json(j.at("model"));
    a.report = j.value("report", json::object());
    return a;
}

json to_json(const ModelInfo& info) {
    json classes = json::array();
    for (const auto& c : info.classes) classes.push_back({{"id", c.id}, {"name", c.name}});
    return json{
        {"id", info.id},
        {"created_at_ms", info.created_at_ms},
        {"fingerprint", info.fingerprint},
        {"classes", classes},
        {"stored_vectors", info.stored_vectors},
        {"active", info.active},
    };
}

std::string training_fingerprint(std::span<const cls::TrainingSample> samples) {
    json rows = json::array();
    for (const auto& s : samples) {
        rows.push_back({to_json(s.vector), s.label.id, s.label.name});
    }
    return sha256_hex(canonical_dump(rows));
}

std::string serialize_artifact(const ModelArtifact& artifact) {
    ModelArtifact pruned = artifact;
    pruned.model = cls::prune_zero_weights(artifact.model);
    const std::string payload = canonical_dump(to_json(pruned)) + "\n";
    return std::string(kMagic) + " " + std::to_string(artifact.schema_version) + " sha256=" + sha256_hex(payload) +
           " bytes=" + std::to_string(payload.size()) + "\n" + payload;
}

ModelArtifact parse_artifact(std::string_view bytes) {
    const auto eol = bytes.find('\n');
    if (eol == std::string_view::npos) {
        throw ChecksumError("model file has no header line");
    }
    const std::string_view header = bytes.substr(0, eol);
    const std::string_view payload = bytes.substr(eol + 1);

    // NSSMODEL <schema> sha256=<hex> bytes=<n>
    auto take = [&header](std::string_view prefix) -> std::string_view {
        const auto at = header.find(prefix);
        if (at == std::string_view::npos) return {};
        const auto start = at + prefix.size();
        const auto end = header.find(' ', start);
        return header.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    };
    if (header.substr(0, kMagic.size()) != kMagic) {
        throw ChecksumError("not a model file (bad magic)");
    }
    int schema = 0;
    const auto schema_text = take(std::string(kMagic) + " ");
    if (std::from_chars(schema_text.data(), schema_text.data() + schema_text.size(), schema).ec != std::errc{}) {
        throw ChecksumError("model header has no schema version");
    }
    if (schema > kArtifactSchemaVersion) {
        throw SchemaError("model file schema " + std::to_string(schema) + " is newer than supported " +
                          std::to_string(kArtifactSchemaVersion));
    }
    const auto digest = take("sha256=");
    const auto length_text = take("bytes=");
    std::size_t length = 0;
    if (std::from_chars(length_text.data(), length_text.data() + length_text.size(), length).ec != std::errc{}) {
        throw ChecksumError("model header has no length");
    }
    if (payload.size() != length) {
        throw ChecksumError("model payload is " + std::to_string(payload.size()) + " bytes, header says " +
                            std::to_string(length));
    }
    if (sha256_hex(payload) != digest) {
        throw ChecksumError("model payload checksum mismatch");
    }
    try {
        return artifact_from_json(json::parse(payload));
    } catch (const json::exception& e) {
        throw ChecksumError(std::string("model payload is not valid JSON: ") + e.what());
    }
}

std::string model_id_for(std::string_view serialized) {
    return "m-" + sha256_hex(serialized).substr(0, 16);
}

ModelStore::ModelStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
        throw StoreIoError("cannot create model directory " + dir_.string() + ": " + ec.message());
    }
}

std::filesystem::path ModelStore::file_for(const std::string& id) const {
    if (!valid_id(id)) {
        throw StoreError("invalid model id '" + id + "'");
    }
    return dir_ / (id + std::string(kModelExtension));
}

std::string ModelStore::save(const ModelArtifact& artifact) {
    const std::string bytes = serialize_artifact(artifact);
    const std::string id = model_id_for(bytes);
    std::lock_guard lock(mutex_);
    const auto path = file_for(id);
    if (!std::filesystem::exists(path)) {
        atomic_write_file(path, bytes);
    }
    return id;
}

ModelArtifact ModelStore::load(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto path = file_for(id);
    if (!std::filesystem::exists(path)) {
        throw StoreError("unknown model '" + id + "'");
    }
    return parse_artifact(read_file(path));
}

bool ModelStore::contains(const std::string& id) const {
    std::lock_guard lock(mutex_);
    return valid_id(id) && std::filesystem::exists(file_for(id));
}

std::vector<ModelInfo> ModelStore::list() const {
    const auto active = active_id();
    std::lock_guard lock(mutex_);
    std::vector<ModelInfo> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (entry.path().extension() != kModelExtension) continue;
        const std::string id = entry.path().stem().string();
        try {
            const auto a = parse_artifact(read_file(entry.path()));
            out.push_back(ModelInfo{id, a.created_at_ms, a.fingerprint, a.model.classes, a.model.weighted.size(),
                                    active && *active == id});
        } catch (const StoreError&) {
            // Unreadable files are not listed; load() reports them.
        }
    }
    std::sort(out.begin(), out.end(), [](const ModelInfo& a, const ModelInfo& b) {
        return a.created_at_ms != b.created_at_ms ? a.created_at_ms > b.created_at_ms : a.id < b.id;
    });
    return out;
}

void ModelStore::activate(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (!std::filesystem::exists(file_for(id))) {
        throw StoreError("unknown model '" + id + "'");
    }
    atomic_write_file(dir_ / kActiveFile, id + "\n");
}

std::optional<std::string> ModelStore::active_id() const {
    std::lock_guard lock(mutex_);
    const auto path = dir_ / kActiveFile;
    if (!std::filesystem::exists(path)) {
        return std::nullopt;
    }
    std::string id = read_file(path);
    while (!id.empty() && (id.back() == '\n' || id.back() == '\r')) id.pop_back();
    if (!valid_id(id)) {
        throw StoreError("ACTIVE pointer is corrupt");
    }
    return id;
}

void ModelStore::export_model(const std::string& id, const std::filesystem::path& out) const {
    std::string bytes;
    {
        std::lock_guard lock(mutex_);
        const auto path = file_for(id);
        if (!std::filesystem::exists(path)) {
            throw StoreError("unknown model '" + id + "'");
        }
        bytes = read_file(path);
    }
    parse_artifact(bytes);
    atomic_write_file(out, bytes);
}

std::string ModelStore::import_model(const std::filesystem::path& in) {
    const std::string bytes = read_file(in);
    const ModelArtifact artifact = parse_artifact(bytes);
    if (serialize_artifact(artifact) != bytes) {
        throw ChecksumError("model file " + in.string() + " is not in canonical form");
    }
    return save(artifact);
}

}  // namespace nss::store
