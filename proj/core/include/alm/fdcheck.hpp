#pragma once

#include <functional>
#include <vector>

#include "alm/graph.hpp"
#include "alm/rng.hpp"

namespace alm {

// Central finite differences against reverse-mode gradients.
//
// `loss(with_grad)` must rebuild the forward pass from the current parameter
// values and return the scalar loss; when with_grad is true it must also run
// backward so that each parameter's grad holds the autodiff gradient.
// Coordinates are sampled per tensor (all of them when a tensor is small).
// Returns max over sampled coordinates of |g_ad - g_fd| / (|g_ad| + |g_fd| + 1e-12).
struct FdCheckResult {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

FdCheckResult finite_difference_check(const std::function<double(bool with_grad)>& loss,
                                      const std::vector<Parameter*>& params,
                                      double h = 1e-5,
                                      std::size_t max_coords_per_tensor = 16,
                                      Rng rng = Rng(0x5eed));

}  // namespace alm
