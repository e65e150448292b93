#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "cpsc/optim.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

/// Central-difference gradient of a deterministic scalar loss over a set of
/// parameter blocks: (L(th+h) - L(th-h)) / 2h per entry. Parameters are
/// perturbed in place and restored exactly.
inline std::vector<Tensor2D> finite_diff_grad(const std::function<double()>& loss_fn,
                                              const std::vector<ParamBlock*>& params,
                                              double h) {
    if (!(h > 0.0)) throw ConfigError("finite_diff_grad: h must be > 0");
    std::vector<Tensor2D> grads;
    grads.reserve(params.size());
    for (ParamBlock* p : params) {
        Tensor2D g(p->value.rows, p->value.cols, 0.0);
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            const double up = loss_fn();
            p->value.data[i] = saved - h;
            const double down = loss_fn();
            p->value.data[i] = saved;
            g.data[i] = (up - down) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Largest relative error between an analytic and a numeric gradient,
/// with a small absolute floor in the denominator.
inline double max_rel_error(const Tensor2D& analytic, const Tensor2D& numeric) {
    if (!analytic.same_shape(numeric)) throw DimensionError("max_rel_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic.data[i];
        const double n = numeric.data[i];
        const double denom = std::max({std::abs(a), std::abs(n), 1e-6});
        worst = std::max(worst, std::abs(a - n) / denom);
    }
    return worst;
}

} // namespace cpsc
