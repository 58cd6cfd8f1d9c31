#include "nss/service/training.hpp"

#include "nss/features/pipeline.hpp"

#include <map>

namespace nss::service {

namespace cls = nss::classifier;
using nlohmann::json;

TrainingOutcome train_model(const TrainingInput& input, const cls::TrainParams& params,
                            const cls::KernelParams& kernel, std::int64_t created_at_ms,
                            const TrainingHooks& hooks) {
    if (input.rows.size() != input.labels.size()) {
        throw cls::ClassifierError("training rows and labels differ in length");
    }
    if (input.rows.empty()) {
        throw cls::ClassifierError("no training samples");
    }
    for (const auto& row : input.rows) {
        if (row.size() != input.feature_order.size()) {
            throw cls::ClassifierError("training row has " + std::to_string(row.size()) + " values, expected " +
                                       std::to_string(input.feature_order.size()));
        }
    }

    const NormParams norm = input.normalize ? features::fit_normalizer_rows(input.rows, input.feature_order)
                                            : NormParams::identity(input.feature_order);
    std::vector<cls::TrainingSample> sequence;
    sequence.reserve(input.rows.size());
    for (std::size_t i = 0; i < input.rows.size(); ++i) {
        sequence.push_back({features::normalize_values(input.rows[i], norm), input.labels[i],
                            i < input.source_ids.size() ? input.source_ids[i] : std::nullopt});
    }

    const auto s1 = cls::train_stage1(sequence, params, kernel, hooks.stage1);
    if (hooks.stage2_started) hooks.stage2_started();
    const auto s2 = cls::train_stage2(s1.model, sequence, params);
    cls::PotentialModel model = s2.model;
    model.norm = norm;
    model.epsilon = params.epsilon;

    std::size_t correct = 0;
    std::size_t unidentified = 0;
    std::map<std::string, std::size_t> per_class;
    for (const auto& s : sequence) {
        const auto d = cls::classify(model, s.vector);
        if (d.label == s.label.id) ++correct;
        if (!d.label) ++unidentified;
        ++per_class[s.label.name];
    }
    json classes = json::array();
    for (const auto& c : model.classes) classes.push_back(c.name);

    json report{
        {"samples", sequence.size()},
        {"class_counts", per_class},
        {"classes", classes},
        {"feature_order", input.feature_order},
        {"normalize", input.normalize},
        {"params",
         {{"delta", params.delta},
          {"alpha", kernel.alpha},
          {"epsilon", params.epsilon},
          {"max_passes", params.max_passes},
          {"variant", params.variant == cls::UpdateVariant::A ? "a" : "b"}}},
        {"stage1", {{"passes", s1.passes}, {"converged", s1.converged}, {"updates", s1.updates}}},
        {"stage2", {{"passes", s2.passes}, {"converged", s2.converged}, {"reassignments", s2.reassignments}}},
        {"training_accuracy", static_cast<double>(correct) / static_cast<double>(sequence.size())},
        {"training_unidentified", unidentified},
        {"stored_vectors", model.weighted.size()},
    };

    TrainingOutcome out;
    out.artifact.model = std::move(model);
    out.artifact.created_at_ms = created_at_ms;
    out.artifact.fingerprint = store::training_fingerprint(sequence);
    out.artifact.report = report;
    out.report = std::move(report);
    return out;
}

}  // namespace nss::service
