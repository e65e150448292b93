#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "cpsc/conformal.hpp"
#include "cpsc/errors.hpp"
#include "cpsc/model.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

// ---------------------------------------------------------------------------
// Diversity-constrained decomposition loss
// ---------------------------------------------------------------------------

struct DiversityLossTerms {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double consistency = 0.0; // (1/n) sum_k KL(P(h) || P(c_k))
    double diversity = 0.0;   // (1/(n(n-1))) sum_{i != j} KL(P(c_i) || P(c_j))
    double total = 0.0;       // lambda1 * consistency - lambda2 * diversity
};

/// Pulls every component's softmax distribution toward the original feature's
/// while pushing the components' distributions apart. KL terms are directed
/// and summed over ordered pairs i != j.
inline DiversityLossTerms diversity_loss(const FeatureVector& h,
                                         const std::vector<FeatureVector>& components,
                                         double lambda1, double lambda2) {
    const std::size_t n = components.size();
    if (n < 2) throw ConfigError("diversity_loss: needs at least 2 components");
    for (const FeatureVector& c : components)
        if (c.size() != h.size()) throw DimensionError("diversity_loss: component dim mismatch");

    const FeatureVector ph = softmax(h);
    std::vector<FeatureVector> pc(n);
    for (std::size_t k = 0; k < n; ++k) pc[k] = softmax(components[k]);

    DiversityLossTerms out;
    out.lambda1 = lambda1;
    out.lambda2 = lambda2;
    double cons = 0.0;
    for (std::size_t k = 0; k < n; ++k) cons += kl_div(ph, pc[k]);
    out.consistency = cons / static_cast<double>(n);
    double div = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) div += kl_div(pc[i], pc[j]);
    out.diversity = div / static_cast<double>(n * (n - 1));
    out.total = lambda1 * out.consistency - lambda2 * out.diversity;
    return out;
}

namespace detail {

// Gradient of KL(softmax(a) || softmax(b)) as actually computed, i.e. with
// the kEpsKl floor inside both logarithms. Honoring the floor matters: the
// clamp caps how far apart the diversity term can reward pushing two
// components, so the repulsive force dies out at saturation instead of
// persisting forever. Below the floor nothing changes relative to the
// unclamped textbook expressions.
//
//   d/da_j = p_j * (g_j - sum_i p_i g_i),  g_i = f'(p_i) - ln(max(q_i, eps))
//   with f'(p) = ln(max(p, eps)) + [p > eps]
//   d/db_j = q_j * P_T - p_j * [j in T],   T = {i : q_i > eps}, P_T = sum_{i in T} p_i
struct KlGrad {
    FeatureVector da, db;
};

inline KlGrad kl_softmax_grad(const FeatureVector& p, const FeatureVector& logp,
                              const FeatureVector& q, const FeatureVector& logq) {
    const std::size_t d = p.size();
    KlGrad out;
    out.da.assign(d, 0.0);
    out.db.assign(d, 0.0);
    double mean_g = 0.0;
    FeatureVector g(d);
    double p_unclamped = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        g[i] = (logp[i] + (p[i] > kEpsKl ? 1.0 : 0.0)) - logq[i];
        mean_g += p[i] * g[i];
        if (q[i] > kEpsKl) p_unclamped += p[i];
    }
    for (std::size_t j = 0; j < d; ++j) {
        out.da[j] = p[j] * (g[j] - mean_g);
        out.db[j] = q[j] * p_unclamped - (q[j] > kEpsKl ? p[j] : 0.0);
    }
    return out;
}

} // namespace detail

/// Accumulates scale * d(total)/dh into dh_out and scale * d(total)/dc_k into
/// dc_out[k]. This is the exact gradient of the clamped KL values that
/// diversity_loss reports.
inline void diversity_loss_backward(const FeatureVector& h,
                                    const std::vector<FeatureVector>& components,
                                    double lambda1, double lambda2, double scale,
                                    FeatureVector& dh_out,
                                    std::vector<FeatureVector>& dc_out) {
    const std::size_t n = components.size();
    const std::size_t d = h.size();
    if (n < 2) throw ConfigError("diversity_loss_backward: needs at least 2 components");
    if (dh_out.size() != d) dh_out.assign(d, 0.0);
    if (dc_out.size() != n) dc_out.assign(n, FeatureVector(d, 0.0));
    for (FeatureVector& dc : dc_out)
        if (dc.size() != d) dc.assign(d, 0.0);

    const FeatureVector ph = softmax(h);
    std::vector<FeatureVector> pc(n);
    std::vector<FeatureVector> logpc(n);
    FeatureVector logph(d);
    for (std::size_t i = 0; i < d; ++i) logph[i] = std::log(std::max(ph[i], kEpsKl));
    for (std::size_t k = 0; k < n; ++k) {
        pc[k] = softmax(components[k]);
        logpc[k].resize(d);
        for (std::size_t i = 0; i < d; ++i) logpc[k][i] = std::log(std::max(pc[k][i], kEpsKl));
    }

    const double c1 = scale * lambda1 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const detail::KlGrad grad = detail::kl_softmax_grad(ph, logph, pc[k], logpc[k]);
        for (std::size_t i = 0; i < d; ++i) {
            dh_out[i] += c1 * grad.da[i];
            dc_out[k][i] += c1 * grad.db[i];
        }
    }

    if (lambda2 != 0.0) {
        const double c2 = scale * lambda2 / static_cast<double>(n * (n - 1));
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                if (a == b) continue;
                const detail::KlGrad grad =
                    detail::kl_softmax_grad(pc[a], logpc[a], pc[b], logpc[b]);
                // the diversity term enters the total with a minus sign
                for (std::size_t i = 0; i < d; ++i) {
                    dc_out[a][i] -= c2 * grad.da[i];
                    dc_out[b][i] -= c2 * grad.db[i];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Conformal reliability scoring and top-K reconstruction
// ---------------------------------------------------------------------------

/// Reliability of each component: feed it through modality m's unimodal head
/// and rank the target label inside the component's prediction set. Optionally
/// reports each component's nonconformity for the target label, which feeds
/// the all-zero fallback selection.
inline std::vector<double> score_components(const CpscModel& model,
                                            const ConformalState& conformal, int m,
                                            const std::vector<FeatureVector>& components,
                                            int target_label,
                                            std::vector<double>* label_scores_out = nullptr) {
    conformal.require_calibrated();
    if (target_label < 0 || target_label >= model.config.class_count)
        throw IndexError("score_components: target label out of range");
    std::vector<double> reliability(components.size(), 0.0);
    if (label_scores_out != nullptr) label_scores_out->assign(components.size(), 1.0);
    for (std::size_t k = 0; k < components.size(); ++k) {
        const FeatureVector probs = unimodal_predict(model, m, components[k]);
        reliability[k] = rank_reliability(probs, conformal.q_hat, target_label);
        if (label_scores_out != nullptr)
            (*label_scores_out)[k] = nonconformity(probs, target_label);
    }
    return reliability;
}

/// Indices of the k largest reliability values, ties won by the smaller
/// component index. Returned ascending so downstream averaging has a fixed
/// summation order.
inline std::vector<int> select_top_k(const std::vector<double>& reliability, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > reliability.size())
        throw ConfigError("select_top_k: k out of range");
    std::vector<int> idx(reliability.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (reliability[static_cast<std::size_t>(a)] != reliability[static_cast<std::size_t>(b)])
            return reliability[static_cast<std::size_t>(a)] > reliability[static_cast<std::size_t>(b)];
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

/// Fallback when every reliability is zero: pick the k components whose
/// nonconformity for the target label is lowest (ties to the smaller index).
inline std::vector<int> select_by_lowest_score(const std::vector<double>& label_scores, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > label_scores.size())
        throw ConfigError("select_by_lowest_score: k out of range");
    std::vector<int> idx(label_scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (label_scores[static_cast<std::size_t>(a)] != label_scores[static_cast<std::size_t>(b)])
            return label_scores[static_cast<std::size_t>(a)] < label_scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline FeatureVector average_components(const std::vector<FeatureVector>& components,
                                        const std::vector<int>& selected) {
    if (selected.empty()) throw ConfigError("average_components: empty selection");
    FeatureVector out(components[0].size(), 0.0);
    for (int k : selected) axpy(1.0, components[static_cast<std::size_t>(k)], out);
    const double inv = 1.0 / static_cast<double>(selected.size());
    for (double& v : out) v *= inv;
    return out;
}

/// Average of the K most reliable components; the discrete selection carries
/// no gradient, each selected component receives coefficient 1/K.
inline std::pair<FeatureVector, std::vector<int>> reconstruct_topk(
    const std::vector<FeatureVector>& components, const std::vector<double>& reliability,
    int k) {
    if (components.size() != reliability.size())
        throw DimensionError("reconstruct_topk: component/score count mismatch");
    std::vector<int> selected = select_top_k(reliability, k);
    return {average_components(components, selected), std::move(selected)};
}

/// Per-modality component bundle produced by the RSC stage of one sample.
struct ComponentSet {
    int modality = 0;
    std::vector<FeatureVector> components;
    std::vector<double> reliability;
    std::vector<int> selected;
};

/// Instance-wise form of the deviation bound: the selected-average's distance
/// to a reference representation never exceeds the mean distance of the
/// selected components themselves. Returns (lhs, rhs).
inline std::pair<double, double> proposition1_check(const std::vector<FeatureVector>& components,
                                                    const std::vector<int>& selected,
                                                    const FeatureVector& h_star) {
    const FeatureVector mean = average_components(components, selected);
    FeatureVector diff(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) diff[i] = mean[i] - h_star[i];
    const double lhs = l2_norm(diff);
    double rhs = 0.0;
    for (int k : selected) {
        FeatureVector dk(h_star.size());
        const FeatureVector& c = components[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < dk.size(); ++i) dk[i] = c[i] - h_star[i];
        rhs += l2_norm(dk);
    }
    rhs /= static_cast<double>(selected.size());
    return {lhs, rhs};
}

} // namespace cpsc
