#pragma once

// Test-only generators and brute-force oracles. Nothing here calls into the
// classifier's arithmetic; the oracles recompute kernel sums from scratch.

#include "nss/classifier/potential.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace nss::testing {

/// Portable generator: mt19937_64 output is fixed by the standard, and the
/// uniform/normal transforms below are explicit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }

    double normal() {
        if (spare_) {
            const double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        return r * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

inline double oracle_kernel(std::span<const double> a, std::span<const double> b, double alpha) {
    double r2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = b[i] - a[i];
        r2 += d * d;
    }
    return 1.0 / (1.0 + alpha * r2);
}

/// Double loop over classes and stored vectors.
inline std::vector<double> oracle_potentials(const classifier::PotentialModel& model,
                                             const classifier::FeatureVector& y) {
    std::vector<double> out;
    for (std::size_t p = 0; p < model.classes.size(); ++p) {
        double sum = 0.0;
        for (const auto& wv : model.weighted) {
            if (wv.owner == p) {
                sum += wv.weight * oracle_kernel(wv.vector.values(), y.values(), model.kernel.alpha);
            }
        }
        out.push_back(sum);
    }
    return out;
}

/// Oracle argmax with lowest-id ties and the unidentified margin rule.
inline std::optional<classifier::ClassId> oracle_label(const std::vector<double>& k, double epsilon) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < k.size(); ++p) {
        if (k[p] > k[best]) best = p;
    }
    double second = -1.0;
    for (std::size_t p = 0; p < k.size(); ++p) {
        if (p != best && k[p] > second) second = k[p];
    }
    if (epsilon > 0.0 && k[best] - second <= epsilon) return std::nullopt;
    return static_cast<classifier::ClassId>(best);
}

/// Two unit-variance Gaussian clouds in 2-D whose centers are 6 apart,
/// interleaved A, B, A, B, ... Points that stray across the bisector are
/// redrawn so the set is separable by construction.
inline std::vector<classifier::TrainingSample> gaussian_pair(std::uint64_t seed, std::size_t per_class) {
    Rng rng(seed);
    const classifier::ClassLabel a{0, "A"};
    const classifier::ClassLabel b{1, "B"};
    std::vector<classifier::TrainingSample> out;
    auto draw = [&](double cx) {
        for (;;) {
            const double x = cx + rng.normal();
            const double y = rng.normal();
            if ((cx < 0) == (x < 0)) return classifier::FeatureVector{x, y};
        }
    };
    for (std::size_t i = 0; i < per_class; ++i) {
        out.push_back({draw(-3.0), a, std::nullopt});
        out.push_back({draw(3.0), b, std::nullopt});
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("nss-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace nss::testing
