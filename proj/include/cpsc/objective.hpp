#pragma once

#include <algorithm>
#include <vector>

#include "cpsc/conformal.hpp"
#include "cpsc/gsc.hpp"
#include "cpsc/model.hpp"
#include "cpsc/rsc.hpp"
#include "cpsc/synth.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

/// Discrete per-sample decisions of one training batch, frozen so the
/// remaining objective is differentiable: component selections (RSC) and
/// modality weights (GSC). Gradient checks perturb parameters around these.
struct FixedBatchChoices {
    std::vector<std::vector<std::vector<int>>> selection; // [sample][modality][<=n]
    std::vector<std::vector<double>> weights;             // [sample][modality]
};

/// Runs the live scoring path once at the current parameters to obtain the
/// selections and GSC weights the trainer would use for this batch.
inline FixedBatchChoices compute_batch_choices(const CpscModel& model,
                                               const ConformalState& conformal,
                                               const std::vector<const LabeledSample*>& batch,
                                               const GscConfig& gsc) {
    conformal.require_calibrated();
    const int m_count = model.config.modality_count;
    FixedBatchChoices out;
    out.selection.resize(batch.size());
    out.weights.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LabeledSample& s = *batch[i];
        SampleCache cache = forward_repr(model, s.features, s.label);
        out.selection[i].resize(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m) {
            ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
            decompose_cached(model, m, mc);
            std::vector<double> label_scores;
            const std::vector<double> rel =
                score_components(model, conformal, m, mc.comps, s.label, &label_scores);
            const bool all_zero =
                std::all_of(rel.begin(), rel.end(), [](double r) { return r == 0.0; });
            out.selection[i][static_cast<std::size_t>(m)] =
                all_zero ? select_by_lowest_score(label_scores, model.config.top_k)
                         : select_top_k(rel, model.config.top_k);
        }
        finish_calibrated(model, cache, out.selection[i]);
        std::vector<FeatureVector> uni_probs(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m)
            uni_probs[static_cast<std::size_t>(m)] = cache.mods[static_cast<std::size_t>(m)].uni_probs;
        const std::vector<double> rho =
            modality_reliability_from_probs(uni_probs, cache.fused_probs, conformal);
        out.weights[i].resize(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m)
            out.weights[i][static_cast<std::size_t>(m)] =
                gsc_weight(rho[static_cast<std::size_t>(m)], gsc);
    }
    return out;
}

/// Batch-mean training objective at frozen choices:
///   fused CE + per-modality diversity losses + GSC-weighted unimodal CEs.
inline double training_loss_fixed(const CpscModel& model,
                                  const std::vector<const LabeledSample*>& batch,
                                  const FixedBatchChoices& choices, double lambda1,
                                  double lambda2) {
    const int m_count = model.config.modality_count;
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LabeledSample& s = *batch[i];
        SampleCache cache = forward_repr(model, s.features, s.label);
        for (int m = 0; m < m_count; ++m) decompose_cached(model, m, cache.mods[static_cast<std::size_t>(m)]);
        finish_calibrated(model, cache, choices.selection[i]);
        double li = cross_entropy(cache.fused_probs, s.label);
        for (int m = 0; m < m_count; ++m) {
            const ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
            if (lambda1 != 0.0 || lambda2 != 0.0)
                li += diversity_loss(mc.h, mc.comps, lambda1, lambda2).total;
            li += choices.weights[i][static_cast<std::size_t>(m)] *
                  cross_entropy(mc.uni_probs, s.label);
        }
        total += li;
    }
    return total / static_cast<double>(batch.size());
}

/// Analytic gradient of training_loss_fixed, accumulated into the model's
/// grad slots.
inline void training_backward_fixed(CpscModel& model,
                                    const std::vector<const LabeledSample*>& batch,
                                    const FixedBatchChoices& choices, double lambda1,
                                    double lambda2) {
    const int m_count = model.config.modality_count;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const LabeledSample& s = *batch[i];
        SampleCache cache = forward_repr(model, s.features, s.label);
        for (int m = 0; m < m_count; ++m) decompose_cached(model, m, cache.mods[static_cast<std::size_t>(m)]);
        finish_calibrated(model, cache, choices.selection[i]);
        HeadSeeds seeds;
        seeds.fused = inv_batch;
        seeds.unimodal.resize(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m)
            seeds.unimodal[static_cast<std::size_t>(m)] =
                inv_batch * choices.weights[i][static_cast<std::size_t>(m)];
        if (lambda1 != 0.0 || lambda2 != 0.0) {
            ExtraGrads extra;
            extra.dh.assign(static_cast<std::size_t>(m_count), FeatureVector());
            extra.dc.assign(static_cast<std::size_t>(m_count), {});
            for (int m = 0; m < m_count; ++m) {
                const ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
                diversity_loss_backward(mc.h, mc.comps, lambda1, lambda2, inv_batch,
                                        extra.dh[static_cast<std::size_t>(m)],
                                        extra.dc[static_cast<std::size_t>(m)]);
            }
            backward_sample(model, cache, seeds, &extra);
        } else {
            backward_sample(model, cache, seeds);
        }
    }
}

} // namespace cpsc
