#pragma once

#include <cmath>
#include <vector>

#include "cpsc/conformal.hpp"
#include "cpsc/errors.hpp"
#include "cpsc/model.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

struct GscConfig {
    double a = 1.0; // weight slope
    double b = 0.5; // weight baseline

    void validate() const {
        // w(rho) = a*rho + b must be non-negative on [0,1]
        if (b < 0.0 || a + b < 0.0)
            throw ConfigError("gsc: need b >= 0 and a + b >= 0 so weights stay non-negative");
    }
};

inline double gsc_weight(double rho, const GscConfig& cfg) { return cfg.a * rho + cfg.b; }

/// Per-modality reliability against the fused prediction: the fused label
/// y' = argmax(fused_probs) (ties to the smallest class) is ranked inside each
/// unimodal head's prediction set. Ground-truth labels are never consulted.
inline std::vector<double> modality_reliability_from_probs(
    const std::vector<FeatureVector>& uni_probs, const FeatureVector& fused_probs,
    const ConformalState& conformal) {
    conformal.require_calibrated();
    const int fused_label = argmax(fused_probs);
    std::vector<double> rho(uni_probs.size(), 0.0);
    for (std::size_t m = 0; m < uni_probs.size(); ++m)
        rho[m] = rank_reliability(uni_probs[m], conformal.q_hat, fused_label);
    return rho;
}

inline std::vector<double> modality_reliability(const CpscModel& model,
                                                const ConformalState& conformal,
                                                const std::vector<FeatureVector>& calibrated_feats,
                                                const FeatureVector& fused_probs) {
    if (static_cast<int>(calibrated_feats.size()) != model.config.modality_count)
        throw DimensionError("modality_reliability: one feature vector per modality expected");
    std::vector<FeatureVector> uni_probs(calibrated_feats.size());
    for (int m = 0; m < model.config.modality_count; ++m)
        uni_probs[static_cast<std::size_t>(m)] =
            unimodal_predict(model, m, calibrated_feats[static_cast<std::size_t>(m)]);
    return modality_reliability_from_probs(uni_probs, fused_probs, conformal);
}

/// Accumulates (1/|B|) * sum_i w[i][m] * grad of the unimodal CE loss of each
/// modality into the parameters reached by that modality's unimodal path.
/// Weights are constants; nothing differentiates through the rank operator.
inline void weighted_unimodal_backward(CpscModel& model, const std::vector<SampleCache>& caches,
                                       const std::vector<std::vector<double>>& weights) {
    if (caches.size() != weights.size())
        throw DimensionError("weighted_unimodal_backward: weight count mismatch");
    const double inv_batch = 1.0 / static_cast<double>(caches.size());
    for (std::size_t i = 0; i < caches.size(); ++i) {
        if (static_cast<int>(weights[i].size()) != model.config.modality_count)
            throw DimensionError("weighted_unimodal_backward: per-modality weight count mismatch");
        HeadSeeds seeds;
        seeds.fused = 0.0;
        seeds.unimodal.resize(weights[i].size());
        for (std::size_t m = 0; m < weights[i].size(); ++m)
            seeds.unimodal[m] = inv_batch * weights[i][m];
        backward_sample(model, caches[i], seeds);
    }
}

struct VarianceDiagnostic {
    double weighted_var = 0.0;
    double unweighted_var = 0.0;
};

/// Trace of the per-sample covariance for the weighted and the unweighted
/// gradient estimator. Weighted samples are normalized by the mean weight so
/// uniform weights reproduce the unweighted statistic exactly. Diagnostic
/// only; nothing is asserted.
inline VarianceDiagnostic variance_diagnostic(const std::vector<FeatureVector>& gradient_samples,
                                              const std::vector<double>& weights) {
    if (gradient_samples.size() < 2)
        throw StatisticsError("variance_diagnostic: need at least 2 samples");
    if (gradient_samples.size() != weights.size())
        throw DimensionError("variance_diagnostic: weight count mismatch");
    const std::size_t n = gradient_samples.size();
    const std::size_t dim = gradient_samples[0].size();
    for (const FeatureVector& g : gradient_samples)
        if (g.size() != dim) throw DimensionError("variance_diagnostic: gradient dim mismatch");

    double wbar = 0.0;
    for (double w : weights) wbar += w;
    wbar /= static_cast<double>(n);
    if (wbar == 0.0) throw StatisticsError("variance_diagnostic: zero mean weight");

    VarianceDiagnostic out;
    for (std::size_t j = 0; j < dim; ++j) {
        double mean_u = 0.0, mean_w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean_u += gradient_samples[i][j];
            mean_w += (weights[i] / wbar) * gradient_samples[i][j];
        }
        mean_u /= static_cast<double>(n);
        mean_w /= static_cast<double>(n);
        double var_u = 0.0, var_w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double du = gradient_samples[i][j] - mean_u;
            const double dw = (weights[i] / wbar) * gradient_samples[i][j] - mean_w;
            var_u += du * du;
            var_w += dw * dw;
        }
        out.unweighted_var += var_u / static_cast<double>(n);
        out.weighted_var += var_w / static_cast<double>(n);
    }
    return out;
}

} // namespace cpsc
