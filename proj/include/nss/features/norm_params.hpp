#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nss {

/// Per-feature z-score parameters. The three vectors are parallel and their
/// order is the order in which normalized feature vectors are emitted.
struct NormParams {
    std::vector<std::string> feature_order;
    std::vector<double> mean;
    std::vector<double> std_dev;

    std::size_t dim() const { return feature_order.size(); }
    bool empty() const { return feature_order.empty(); }

    /// Pass-through parameters (mean 0, std 1) for already normalized input.
    static NormParams identity(std::vector<std::string> names);

    friend bool operator==(const NormParams&, const NormParams&) = default;
};

}  // namespace nss
