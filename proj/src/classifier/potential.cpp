#include "nss/classifier/potential.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <string>

namespace nss::classifier {

namespace {

void require(bool condition, const char* message) {
    if (!condition) {
        throw ClassifierError(message);
    }
}

void check_class(const PotentialModel& model, ClassId cls) {
    if (cls >= model.class_count()) {
        throw ClassifierError("unknown class id " + std::to_string(cls));
    }
}

void check_dim(const PotentialModel& model, const FeatureVector& y) {
    const auto dim = model.dim();
    if (dim != 0 && y.dim() != dim) {
        throw ClassifierError("dimension mismatch: model has " + std::to_string(dim) + ", vector has " +
                              std::to_string(y.dim()));
    }
}

// Best competitor of `own`: highest potential among the other classes, ties
// to the lowest id.
ClassId competitor_of(const std::vector<double>& potentials, ClassId own) {
    std::optional<ClassId> best;
    for (ClassId g = 0; g < potentials.size(); ++g) {
        if (g == own) {
            continue;
        }
        if (!best || potentials[g] > potentials[*best]) {
            best = g;
        }
    }
    return *best;
}

void stage1_update_in_place(PotentialModel& model, const FeatureVector& x_r, ClassId true_class,
                            const TrainParams& params) {
    if (params.variant == UpdateVariant::B) {
        const auto competitor = competitor_of(class_potentials(model, x_r), true_class);
        WeightedVector* nearest = nullptr;
        double nearest_f = -1.0;
        for (auto& wv : model.weighted) {
            if (wv.owner != competitor || wv.weight <= 0.0) {
                continue;
            }
            const double f = potential(wv.vector, x_r, model.kernel);
            if (f > nearest_f) {
                nearest_f = f;
                nearest = &wv;
            }
        }
        if (nearest != nullptr) {
            nearest->weight = std::max(0.0, nearest->weight - params.delta);
        }
    }

    auto stored = std::find_if(model.weighted.begin(), model.weighted.end(), [&](const WeightedVector& wv) {
        return wv.owner == true_class && wv.vector.bit_equal(x_r);
    });
    if (stored != model.weighted.end()) {
        stored->weight += params.delta;
    } else {
        model.weighted.push_back(WeightedVector{x_r, params.delta, true_class});
    }
}

void stage2_move_in_place(PotentialModel& model, std::size_t memory_index, ClassId to) {
    auto& entry = model.memory[memory_index];
    const ClassId from = *entry.assigned;
    require(from != to, "stage-2 update requires distinct classes");
    require(model.stage2_c[from] >= 1, "stage-2 update would make a class count negative");
    const double k_to = total_potential(model, to, entry.vector);
    const double k_from = total_potential(model, from, entry.vector);
    model.stage2_S[to] += k_to;
    model.stage2_c[to] += 1;
    model.stage2_S[from] -= k_from;
    model.stage2_c[from] -= 1;
    entry.assigned = to;
}

void evict_online(PotentialModel& model) {
    while (model.memory.size() > model.memory_limit) {
        auto oldest = std::find_if(model.memory.begin(), model.memory.end(),
                                   [](const RecognizedVector& rv) { return !rv.training; });
        if (oldest == model.memory.end()) {
            return;
        }
        if (oldest->assigned) {
            const ClassId p = *oldest->assigned;
            model.stage2_S[p] -= total_potential(model, p, oldest->vector);
            model.stage2_c[p] -= 1;
        }
        model.memory.erase(oldest);
    }
}

}  // namespace

FeatureVector::FeatureVector(std::vector<double> values) : values_(std::move(values)) {
    require(!values_.empty(), "feature vector must have dimension >= 1");
    for (double v : values_) {
        require(std::isfinite(v), "feature vector contains a non-finite value");
    }
}

FeatureVector::FeatureVector(std::initializer_list<double> values) : FeatureVector(std::vector<double>(values)) {}

bool FeatureVector::bit_equal(const FeatureVector& other) const {
    if (values_.size() != other.values_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(values_[i]) != std::bit_cast<std::uint64_t>(other.values_[i])) {
            return false;
        }
    }
    return true;
}

std::size_t PotentialModel::dim() const {
    if (!weighted.empty()) {
        return weighted.front().vector.dim();
    }
    if (!memory.empty()) {
        return memory.front().vector.dim();
    }
    return 0;
}

std::size_t PotentialModel::training_size() const {
    return static_cast<std::size_t>(
        std::count_if(memory.begin(), memory.end(), [](const RecognizedVector& rv) { return rv.training; }));
}

std::optional<ClassId> PotentialModel::find_class(const std::string& name) const {
    for (const auto& c : classes) {
        if (c.name == name) {
            return c.id;
        }
    }
    return std::nullopt;
}

const std::string& PotentialModel::class_name(ClassId id) const {
    if (id >= classes.size()) {
        throw ClassifierError("unknown class id " + std::to_string(id));
    }
    return classes[id].name;
}

void validate(const KernelParams& kernel) {
    require(std::isfinite(kernel.alpha) && kernel.alpha > 0.0, "kernel alpha must be > 0");
}

void validate(const TrainParams& params) {
    require(std::isfinite(params.delta) && params.delta > 0.0, "delta must be > 0");
    require(params.max_passes >= 1, "max_passes must be >= 1");
    require(std::isfinite(params.epsilon) && params.epsilon >= 0.0, "epsilon must be >= 0");
}

double potential(const FeatureVector& xq, const FeatureVector& xj, const KernelParams& kernel) {
    validate(kernel);
    if (xq.dim() != xj.dim()) {
        throw ClassifierError("dimension mismatch: " + std::to_string(xq.dim()) + " vs " + std::to_string(xj.dim()));
    }
    double r2 = 0.0;
    for (std::size_t i = 0; i < xq.dim(); ++i) {
        const double d = xj[i] - xq[i];
        r2 += d * d;
    }
    return 1.0 / (1.0 + kernel.alpha * r2);
}

double total_potential(const PotentialModel& model, ClassId cls, const FeatureVector& y) {
    check_class(model, cls);
    check_dim(model, y);
    double sum = 0.0;
    for (const auto& wv : model.weighted) {
        if (wv.owner == cls) {
            sum += wv.weight * potential(wv.vector, y, model.kernel);
        }
    }
    return sum;
}

std::vector<double> class_potentials(const PotentialModel& model, const FeatureVector& y) {
    std::vector<double> out(model.class_count(), 0.0);
    for (ClassId p = 0; p < out.size(); ++p) {
        out[p] = total_potential(model, p, y);
    }
    return out;
}

StateDecision classify(const PotentialModel& model, const FeatureVector& y, std::int64_t now_ms) {
    require(model.class_count() >= 2, "model is untrained: fewer than 2 classes");
    require(std::any_of(model.weighted.begin(), model.weighted.end(),
                        [](const WeightedVector& wv) { return wv.weight > 0.0; }),
            "model is untrained: no positively weighted vectors");

    StateDecision decision;
    decision.decided_at_ms = now_ms;
    decision.potentials = class_potentials(model, y);

    ClassId best = 0;
    for (ClassId p = 1; p < decision.potentials.size(); ++p) {
        if (decision.potentials[p] > decision.potentials[best]) {
            best = p;
        }
    }
    const ClassId runner_up = competitor_of(decision.potentials, best);
    decision.margin = decision.potentials[best] - decision.potentials[runner_up];
    if (!(model.epsilon > 0.0 && decision.margin <= model.epsilon)) {
        decision.label = best;
    }
    return decision;
}

bool stage1_needs_update(const PotentialModel& model, const FeatureVector& x_r, ClassId true_class,
                         double epsilon) {
    require(model.class_count() >= 2, "stage-1 check needs at least 2 classes");
    require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be >= 0");
    check_class(model, true_class);
    const auto k = class_potentials(model, x_r);
    const ClassId g = competitor_of(k, true_class);
    return k[true_class] - k[g] <= epsilon;
}

PotentialModel apply_stage1_update(const PotentialModel& model, const FeatureVector& x_r, ClassId true_class,
                                   const TrainParams& params) {
    validate(params);
    require(model.class_count() >= 2, "stage-1 update needs at least 2 classes");
    check_class(model, true_class);
    check_dim(model, x_r);
    PotentialModel next = model;
    stage1_update_in_place(next, x_r, true_class, params);
    return next;
}

Stage1Result train_stage1(std::span<const TrainingSample> sequence, const TrainParams& params,
                          const KernelParams& kernel, const Stage1Observer& observer) {
    validate(params);
    validate(kernel);
    require(!sequence.empty(), "training sequence is empty");

    const std::size_t dim = sequence.front().vector.dim();
    std::map<ClassId, std::string> labels;
    for (const auto& sample : sequence) {
        if (sample.vector.dim() != dim) {
            throw ClassifierError("training vectors have mismatched dimensions");
        }
        auto [it, inserted] = labels.emplace(sample.label.id, sample.label.name);
        if (!inserted && it->second != sample.label.name) {
            throw ClassifierError("class id " + std::to_string(sample.label.id) + " has conflicting names");
        }
    }
    require(labels.size() >= 2, "training sequence needs at least 2 distinct classes");
    require(labels.rbegin()->first == labels.size() - 1, "class ids must be dense 0..K-1");

    Stage1Result result;
    PotentialModel& model = result.model;
    for (const auto& [id, name] : labels) {
        model.classes.push_back(ClassLabel{id, name});
    }
    model.kernel = kernel;
    model.epsilon = params.epsilon;
    model.stage2_S.assign(labels.size(), 0.0);
    model.stage2_c.assign(labels.size(), 0);
    for (const auto& sample : sequence) {
        model.memory.push_back(RecognizedVector{sample.vector, sample.label.id, true});
        model.stage2_c[sample.label.id] += 1;
    }
    model.memory_limit = std::max(kDefaultMemoryLimit, sequence.size());

    for (int pass = 1; pass <= params.max_passes; ++pass) {
        result.passes = pass;
        std::size_t pass_updates = 0;
        for (std::size_t i = 0; i < sequence.size(); ++i) {
            const auto& sample = sequence[i];
            if (!stage1_needs_update(model, sample.vector, sample.label.id, params.epsilon)) {
                continue;
            }
            if (observer) {
                const PotentialModel before = model;
                stage1_update_in_place(model, sample.vector, sample.label.id, params);
                observer(Stage1Step{pass, i, sample.vector, sample.label.id, before, model});
            } else {
                stage1_update_in_place(model, sample.vector, sample.label.id, params);
            }
            ++pass_updates;
        }
        result.updates += pass_updates;
        if (pass_updates == 0) {
            result.converged = true;
            break;
        }
    }
    return result;
}

std::optional<ClassId> stage2_needs_reassign(const PotentialModel& model, const FeatureVector& x_j,
                                             ClassId current_class) {
    check_class(model, current_class);
    require(model.stage2_c.size() == model.class_count() && model.stage2_S.size() == model.class_count(),
            "model has no stage-2 bookkeeping");
    const auto c_i = model.stage2_c[current_class];
    require(c_i >= 1, "current class has no assigned vectors");
    if (c_i == 1) {
        return std::nullopt;
    }

    const auto k = class_potentials(model, x_j);
    const double ci = static_cast<double>(c_i);
    // Change of the current class's mean potential when x_j leaves it.
    const double release = (model.stage2_S[current_class] - ci * k[current_class]) / (ci * (ci - 1.0));

    std::optional<ClassId> best;
    double best_score = 0.0;
    for (ClassId q = 0; q < model.class_count(); ++q) {
        if (q == current_class) {
            continue;
        }
        const double cq = static_cast<double>(model.stage2_c[q]);
        // Change of class q's mean potential when it adopts x_j.
        const double adopt = cq == 0.0 ? k[q] : (cq * k[q] - model.stage2_S[q]) / (cq * (cq + 1.0));
        const double score = adopt + release;
        if (score > best_score) {
            best_score = score;
            best = q;
        }
    }
    return best;
}

PotentialModel apply_stage2_update(const PotentialModel& model, const FeatureVector& x_j, ClassId from, ClassId to) {
    check_class(model, from);
    check_class(model, to);
    require(from != to, "stage-2 update requires distinct classes");
    require(model.stage2_c[from] >= 1, "stage-2 update would make a class count negative");
    auto entry = std::find_if(model.memory.begin(), model.memory.end(), [&](const RecognizedVector& rv) {
        return rv.assigned == from && rv.vector.bit_equal(x_j);
    });
    require(entry != model.memory.end(), "vector is not assigned to the source class");
    PotentialModel next = model;
    stage2_move_in_place(next, static_cast<std::size_t>(entry - model.memory.begin()), to);
    return next;
}

PotentialModel seed_stage2(const PotentialModel& model) {
    PotentialModel next = model;
    next.stage2_S.assign(model.class_count(), 0.0);
    next.stage2_c.assign(model.class_count(), 0);
    for (const auto& rv : next.memory) {
        if (rv.assigned) {
            next.stage2_S[*rv.assigned] += total_potential(next, *rv.assigned, rv.vector);
            next.stage2_c[*rv.assigned] += 1;
        }
    }
    return next;
}

Stage2Result train_stage2(const PotentialModel& model, std::span<const TrainingSample> sequence,
                          const TrainParams& params) {
    validate(params);
    require(model.training_size() == sequence.size(), "sequence does not match the model's training vectors");
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        require(model.memory[i].training && model.memory[i].vector.bit_equal(sequence[i].vector),
                "sequence does not match the model's training vectors");
    }

    Stage2Result result;
    result.model = seed_stage2(model);
    PotentialModel& m = result.model;
    for (int pass = 1; pass <= params.max_passes; ++pass) {
        result.passes = pass;
        std::size_t moved = 0;
        for (std::size_t i = 0; i < sequence.size(); ++i) {
            const auto current = *m.memory[i].assigned;
            if (auto target = stage2_needs_reassign(m, m.memory[i].vector, current)) {
                stage2_move_in_place(m, i, *target);
                ++moved;
            }
        }
        result.reassignments += moved;
        if (moved == 0) {
            result.converged = true;
            break;
        }
    }
    return result;
}

OnlineResult recognize_online(const PotentialModel& model, std::span<const FeatureVector> stream,
                              std::int64_t now_ms) {
    OnlineResult result{{}, model};
    PotentialModel& m = result.model;
    result.decisions.reserve(stream.size());
    for (const auto& x : stream) {
        auto decision = classify(m, x, now_ms);
        m.memory.push_back(RecognizedVector{x, decision.label, false});
        if (decision.label) {
            const ClassId p = *decision.label;
            m.stage2_S[p] += decision.potentials[p];
            m.stage2_c[p] += 1;
        }
        evict_online(m);
        result.decisions.push_back(std::move(decision));
    }
    return result;
}

PotentialModel prune_zero_weights(const PotentialModel& model) {
    PotentialModel next = model;
    std::erase_if(next.weighted, [](const WeightedVector& wv) { return wv.weight == 0.0; });
    return next;
}

}  // namespace nss::classifier
