#include "nss/features/norm_params.hpp"

namespace nss {

NormParams NormParams::identity(std::vector<std::string> names) {
    NormParams p;
    p.mean.assign(names.size(), 0.0);
    p.std_dev.assign(names.size(), 1.0);
    p.feature_order = std::move(names);
    return p;
}

}  // namespace nss
