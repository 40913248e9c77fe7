#include "alm/fdcheck.hpp"

#include <algorithm>
#include <cmath>

#include "alm/errors.hpp"

namespace alm {

FdCheckResult finite_difference_check(const std::function<double(bool)>& loss,
                                      const std::vector<Parameter*>& params,
                                      double h, std::size_t max_coords_per_tensor, Rng rng) {
    // One backward pass gives every autodiff gradient at the probe point.
    for (Parameter* p : params) p->zero_grad();
    const double base = loss(true);
    if (!std::isfinite(base)) throw ModelError("finite_difference_check: non-finite loss");
    std::vector<Tensor> ad_grads;
    ad_grads.reserve(params.size());
    for (Parameter* p : params) ad_grads.push_back(p->grad);

    FdCheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        const std::size_t n = p.value.data.size();
        std::vector<std::size_t> coords;
        if (n <= max_coords_per_tensor) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (std::size_t i = 0; i < max_coords_per_tensor; ++i)
                coords.push_back(static_cast<std::size_t>(rng.uniform_below(n)));
        }
        for (std::size_t ci : coords) {
            const double orig = p.value.data[ci];
            p.value.data[ci] = orig + h;
            const double fp = loss(false);
            p.value.data[ci] = orig - h;
            const double fm = loss(false);
            p.value.data[ci] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw ModelError("finite_difference_check: non-finite loss at probe point");
            const double g_fd = (fp - fm) / (2.0 * h);
            const double g_ad = ad_grads[pi].data[ci];
            const double rel =
                std::abs(g_ad - g_fd) / (std::abs(g_ad) + std::abs(g_fd) + 1e-12);
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.coords_checked;
        }
    }
    return res;
}

}  // namespace alm
