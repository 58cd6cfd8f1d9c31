#pragma once

// Potential-function classifier: kernel, class potentials, decision with an
// unidentified margin, two-stage training and online reorganization.
//
// Every operation takes its inputs by value or const reference and returns a
// new model; nothing here holds mutable shared state.

#include "nss/features/norm_params.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nss::classifier {

using ClassId = std::uint32_t;

class ClassifierError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Normalized point in feature space. Never empty, never NaN or infinite.
class FeatureVector {
public:
    explicit FeatureVector(std::vector<double> values);
    FeatureVector(std::initializer_list<double> values);

    std::size_t dim() const { return values_.size(); }
    std::span<const double> values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    /// Exact bit equality, used to find the stored copy of a presented vector.
    bool bit_equal(const FeatureVector& other) const;

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    std::vector<double> values_;
};

struct ClassLabel {
    ClassId id = 0;
    std::string name;

    friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

struct KernelParams {
    double alpha = 1.0;

    friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

struct WeightedVector {
    FeatureVector vector;
    double weight;
    ClassId owner;

    friend bool operator==(const WeightedVector&, const WeightedVector&) = default;
};

/// One entry of the recognized-vector memory. Training vectors come first
/// and are never evicted; online entries are evicted oldest first.
struct RecognizedVector {
    FeatureVector vector;
    std::optional<ClassId> assigned;
    bool training = false;

    friend bool operator==(const RecognizedVector&, const RecognizedVector&) = default;
};

inline constexpr int kModelSchemaVersion = 1;
inline constexpr std::size_t kDefaultMemoryLimit = 10'000;

struct PotentialModel {
    std::vector<ClassLabel> classes;
    std::vector<WeightedVector> weighted;
    // Stage-2 decision-function scalars and class sizes, indexed by ClassId.
    std::vector<double> stage2_S;
    std::vector<std::int64_t> stage2_c;
    KernelParams kernel;
    double epsilon = 0.0;
    NormParams norm;
    std::vector<RecognizedVector> memory;
    std::size_t memory_limit = kDefaultMemoryLimit;
    int schema_version = kModelSchemaVersion;

    std::size_t class_count() const { return classes.size(); }
    /// Dimension of stored vectors, 0 when nothing is stored yet.
    std::size_t dim() const;
    std::size_t training_size() const;
    std::optional<ClassId> find_class(const std::string& name) const;
    const std::string& class_name(ClassId id) const;

    friend bool operator==(const PotentialModel&, const PotentialModel&) = default;
};

struct StateDecision {
    std::optional<ClassId> label;  // nullopt means Unidentified
    std::vector<double> potentials;
    double margin = 0.0;
    std::int64_t decided_at_ms = 0;

    bool identified() const { return label.has_value(); }

    friend bool operator==(const StateDecision&, const StateDecision&) = default;
};

enum class UpdateVariant { A, B };

struct TrainParams {
    double delta = 1.0;
    int max_passes = 20;
    UpdateVariant variant = UpdateVariant::A;
    double epsilon = 0.0;
};

struct TrainingSample {
    FeatureVector vector;
    ClassLabel label;
    std::optional<std::string> source_id;
};

void validate(const KernelParams& kernel);
void validate(const TrainParams& params);

/// f(x, y) = 1 / (1 + alpha * |x - y|^2), in (0, 1].
double potential(const FeatureVector& xq, const FeatureVector& xj, const KernelParams& kernel);

/// Weighted sum of kernel values from every stored vector of `cls` to `y`,
/// accumulated in storage order.
double total_potential(const PotentialModel& model, ClassId cls, const FeatureVector& y);

/// total_potential for every class, indexed by ClassId.
std::vector<double> class_potentials(const PotentialModel& model, const FeatureVector& y);

/// Argmax of the class potentials; exact ties go to the lowest id. With a
/// positive model epsilon, a margin <= epsilon yields Unidentified.
StateDecision classify(const PotentialModel& model, const FeatureVector& y, std::int64_t now_ms = 0);

/// True when K(true_class, x) minus the best competitor's K is <= epsilon.
bool stage1_needs_update(const PotentialModel& model, const FeatureVector& x_r, ClassId true_class,
                         double epsilon);

/// Adds delta to the stored copy of x_r in true_class (inserting it when
/// absent). Variant B also takes delta from the competitor's stored vector
/// nearest to x_r, flooring its weight at zero.
PotentialModel apply_stage1_update(const PotentialModel& model, const FeatureVector& x_r, ClassId true_class,
                                   const TrainParams& params);

struct Stage1Step {
    int pass;
    std::size_t index;
    const FeatureVector& x_r;
    ClassId true_class;
    const PotentialModel& before;
    const PotentialModel& after;
};
using Stage1Observer = std::function<void(const Stage1Step&)>;

struct Stage1Result {
    PotentialModel model;
    int passes = 0;
    bool converged = false;
    std::size_t updates = 0;
};

/// Classes are taken from the sample labels, whose ids must be dense 0..K-1.
Stage1Result train_stage1(std::span<const TrainingSample> sequence, const TrainParams& params,
                          const KernelParams& kernel, const Stage1Observer& observer = {});

std::optional<ClassId> stage2_needs_reassign(const PotentialModel& model, const FeatureVector& x_j,
                                             ClassId current_class);

PotentialModel apply_stage2_update(const PotentialModel& model, const FeatureVector& x_j, ClassId from, ClassId to);

/// Recomputes S_p as the sum of K_p over the vectors currently assigned to p.
PotentialModel seed_stage2(const PotentialModel& model);

struct Stage2Result {
    PotentialModel model;
    int passes = 0;
    bool converged = false;
    std::size_t reassignments = 0;
};

Stage2Result train_stage2(const PotentialModel& model, std::span<const TrainingSample> sequence,
                          const TrainParams& params);

struct OnlineResult {
    std::vector<StateDecision> decisions;
    PotentialModel model;
};

OnlineResult recognize_online(const PotentialModel& model, std::span<const FeatureVector> stream,
                              std::int64_t now_ms = 0);

/// Drops stored vectors whose weight is exactly zero.
PotentialModel prune_zero_weights(const PotentialModel& model);

}  // namespace nss::classifier
