#pragma once

// Offline and online training share one path: fit (or skip) the normalizer,
// run stage 1 then stage 2, and describe the result in a report.

#include "nss/classifier/potential.hpp"
#include "nss/store/model_store.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nss::service {

struct TrainingInput {
    /// Feature rows in `feature_order`, raw unless `normalize` is false.
    std::vector<std::vector<double>> rows;
    /// Parallel to rows; ids must be dense 0..K-1.
    std::vector<classifier::ClassLabel> labels;
    std::vector<std::optional<std::string>> source_ids;
    std::vector<std::string> feature_order;
    /// Fit a z-score normalizer; otherwise rows are already normalized.
    bool normalize = true;
};

struct TrainingHooks {
    classifier::Stage1Observer stage1;
    std::function<void()> stage2_started;
};

struct TrainingOutcome {
    store::ModelArtifact artifact;
    nlohmann::json report;
};

/// Deterministic for identical inputs. Throws ClassifierError on invalid
/// parameters or fewer than two classes.
TrainingOutcome train_model(const TrainingInput& input, const classifier::TrainParams& params,
                            const classifier::KernelParams& kernel, std::int64_t created_at_ms = 0,
                            const TrainingHooks& hooks = {});

}  // namespace nss::service
