#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cpsc/conformal.hpp"
#include "cpsc/errors.hpp"
#include "cpsc/gsc.hpp"
#include "cpsc/model.hpp"
#include "cpsc/optim.hpp"
#include "cpsc/rng.hpp"
#include "cpsc/rsc.hpp"
#include "cpsc/synth.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

enum class StepMode { PerBatch, PerEpoch };
enum class TrainerMode { Cpsc, Baseline };
enum class InferMode { Raw, Rsc };

inline std::string to_string(StepMode m) {
    return m == StepMode::PerBatch ? "per_batch" : "per_epoch";
}
inline StepMode step_mode_from_string(const std::string& s) {
    if (s == "per_batch") return StepMode::PerBatch;
    if (s == "per_epoch") return StepMode::PerEpoch;
    throw ConfigError("unknown step mode: " + s);
}

struct TrainConfig {
    int warmup_epochs = 5;  // t0
    int total_epochs = 60;  // E (warm-up included)
    int batch_size = 32;
    double alpha = 0.1;
    int cp_update_interval = 1; // epochs between conformal refreshes
    double calibration_fraction = 0.2;
    OptimizerConfig optimizer;
    double lambda1 = 0.8;
    double lambda2 = 0.2;
    GscConfig gsc;
    StepMode step_mode = StepMode::PerBatch;
    double clip_norm = 0.0; // global gradient-norm clip per step; 0 disables
    std::uint64_t seed = 0;

    void validate() const {
        if (warmup_epochs < 0 || warmup_epochs >= total_epochs)
            throw ConfigError("train: need 0 <= warmup_epochs < total_epochs");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("train: alpha must be in (0,1)");
        if (cp_update_interval < 1) throw ConfigError("train: cp_update_interval must be >= 1");
        if (!(calibration_fraction > 0.0 && calibration_fraction <= 0.5))
            throw ConfigError("train: calibration_fraction must be in (0, 0.5]");
        if (lambda1 < 0.0 || lambda2 < 0.0)
            throw ConfigError("train: lambda factors must be >= 0");
        if (clip_norm < 0.0) throw ConfigError("train: clip_norm must be >= 0");
        optimizer.validate();
        gsc.validate();
    }
};

// ---------------------------------------------------------------------------
// Stratified train/calibration split
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> cal;
};

/// Random disjoint split preserving class proportions: per-class quotas are
/// apportioned by largest remainder so the calibration set hits
/// round(fraction * N) exactly while every class stays within +-1 of its
/// proportional share. Deterministic given the seed.
inline SplitIndices split_data(const Dataset& ds, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 0.5))
        throw ConfigError("split_data: fraction must be in (0, 0.5]");
    const int n = static_cast<int>(ds.samples.size());
    if (static_cast<double>(n) < 2.0 / fraction)
        throw ConfigError("split_data: dataset too small for the requested fraction");

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.spec.class_count));
    for (int i = 0; i < n; ++i)
        by_class[static_cast<std::size_t>(ds.samples[static_cast<std::size_t>(i)].label)]
            .push_back(i);

    const int target_total = static_cast<int>(std::llround(fraction * n));
    std::vector<int> quota(by_class.size(), 0);
    std::vector<std::pair<double, int>> remainders; // (-remainder, class) for sorting
    int assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double exact = fraction * static_cast<double>(by_class[c].size());
        quota[c] = static_cast<int>(std::floor(exact));
        assigned += quota[c];
        remainders.push_back({-(exact - std::floor(exact)), static_cast<int>(c)});
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t r = 0; assigned < target_total && r < remainders.size(); ++r) {
        const int c = remainders[r].second;
        if (quota[static_cast<std::size_t>(c)] <
            static_cast<int>(by_class[static_cast<std::size_t>(c)].size())) {
            ++quota[static_cast<std::size_t>(c)];
            ++assigned;
        }
    }

    SplitIndices out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        CounterRng rng(rng_key(seed, "split", static_cast<std::uint64_t>(c)));
        rng.shuffle(by_class[c]);
        for (std::size_t i = 0; i < by_class[c].size(); ++i) {
            if (static_cast<int>(i) < quota[c])
                out.cal.push_back(by_class[c][i]);
            else
                out.train.push_back(by_class[c][i]);
        }
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.cal.begin(), out.cal.end());
    return out;
}

// ---------------------------------------------------------------------------
// Epoch report
// ---------------------------------------------------------------------------

struct EpochReport {
    int epoch = 0;          // overall epoch index (warm-up epochs count)
    std::string phase;      // warmup | warmup_end | train
    double loss_total = 0.0;
    double loss_mul = 0.0;
    std::vector<double> loss_uni;  // per modality, unweighted mean CE
    std::vector<double> loss_div;  // per modality, mean diversity total
    double acc_train_fused = 0.0;
    std::vector<double> acc_train_uni;
    double acc_test_fused = 0.0;
    std::vector<double> acc_test_uni;
    double q_hat = 0.0;
    std::uint64_t cp_version = 0;
    double coverage = 0.0;
    double mean_set_size = 0.0;
    std::vector<double> rho_train; // mean GSC reliability over training samples
    std::vector<double> rho_test;  // mean GSC reliability over held-out samples
    std::vector<double> w_mean;    // mean GSC weight over training samples
    std::vector<double> comp_rel_mean;        // mean component reliability (train)
    std::vector<std::vector<int>> rel_hist;   // [modality][10 bins over [0,1]]
    std::vector<double> weighted_var, unweighted_var; // per modality, first batch
};

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

/// Runs the full training protocol: a warm-up phase of plain multimodal
/// cross-entropy on raw encoder features, conformal initialization on the
/// held-out calibration split, then the self-calibration loop (component
/// scoring, top-K reconstruction, fused + weighted unimodal losses) with the
/// conformal predictor refreshed every cp_update_interval epochs.
///
/// TrainerMode::Baseline runs the same architecture and schedule with the
/// conformal machinery disabled: all components are averaged, unimodal losses
/// carry unit weight and no diversity loss is applied.
class Trainer {
public:
    Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg, TrainerMode mode,
            const Dataset& pool, const Dataset& test)
        : model(CpscModel::init(model_cfg, train_cfg.seed)),
          cfg_(train_cfg),
          mode_(mode),
          pool_(pool),
          test_(test) {
        cfg_.validate();
        if (pool_.modality_count() != model_cfg.modality_count)
            throw ConfigError("trainer: dataset/model modality count mismatch");
        split_ = split_data(pool_, cfg_.calibration_fraction, cfg_.seed);
    }

    // --- protocol pieces -----------------------------------------------

    /// Warm-up epochs of plain fused cross-entropy on raw features followed by
    /// conformal initialization. warmup_epochs == 0 calibrates the randomly
    /// initialized model (the "w/o warm-up" ablation).
    void warmup() {
        for (int e = 1; e <= cfg_.warmup_epochs; ++e) {
            EpochReport rep = run_warmup_epoch(e);
            reports_.push_back(std::move(rep));
        }
        cp_refresh();
        EpochReport rep = make_report_shell(cfg_.warmup_epochs, "warmup_end");
        fill_eval_metrics(rep);
        reports_.push_back(std::move(rep));
    }

    /// One self-calibration epoch (overall index `epoch`, > warmup_epochs).
    EpochReport train_epoch(int epoch) {
        conformal.require_calibrated();
        EpochReport rep = make_report_shell(epoch, "train");
        const std::vector<std::vector<int>> batches = make_batches(epoch);
        const int m_count = model.config.modality_count;

        std::vector<double> sum_uni(m_count, 0.0), sum_div(m_count, 0.0);
        std::vector<double> sum_rho(m_count, 0.0), sum_w(m_count, 0.0), sum_rel(m_count, 0.0);
        double sum_mul = 0.0, sum_total = 0.0;
        long correct_fused = 0;
        std::vector<long> correct_uni(m_count, 0);
        long seen = 0;
        rep.rel_hist.assign(static_cast<std::size_t>(m_count), std::vector<int>(10, 0));

        for (std::size_t b = 0; b < batches.size(); ++b) {
            const std::vector<int>& batch = batches[b];
            const double inv_batch = 1.0 / static_cast<double>(batch.size());
            std::vector<SampleCache> caches(batch.size());
            std::vector<std::vector<double>> weights(batch.size());
            double batch_loss = 0.0;

            for (std::size_t bi = 0; bi < batch.size(); ++bi) {
                const LabeledSample& s = pool_.samples[static_cast<std::size_t>(batch[bi])];
                SampleCache& cache = caches[bi];
                cache = forward_repr(model, s.features, s.label);

                std::vector<std::vector<int>> selection(static_cast<std::size_t>(m_count));
                for (int m = 0; m < m_count; ++m) {
                    ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
                    decompose_cached(model, m, mc);
                    if (mode_ == TrainerMode::Cpsc) {
                        mc.reliability = score_components(model, conformal, m, mc.comps,
                                                          s.label, &mc.label_scores);
                        const bool all_zero = std::all_of(mc.reliability.begin(),
                                                          mc.reliability.end(),
                                                          [](double r) { return r == 0.0; });
                        selection[static_cast<std::size_t>(m)] =
                            all_zero ? select_by_lowest_score(mc.label_scores, model.config.top_k)
                                     : select_top_k(mc.reliability, model.config.top_k);
                        for (double r : mc.reliability) {
                            sum_rel[static_cast<std::size_t>(m)] += r;
                            int bin = static_cast<int>(r * 10.0);
                            if (bin > 9) bin = 9;
                            rep.rel_hist[static_cast<std::size_t>(m)][static_cast<std::size_t>(bin)]++;
                        }
                    } else {
                        selection[static_cast<std::size_t>(m)].resize(
                            static_cast<std::size_t>(model.config.component_count));
                        std::iota(selection[static_cast<std::size_t>(m)].begin(),
                                  selection[static_cast<std::size_t>(m)].end(), 0);
                    }
                }
                finish_calibrated(model, cache, selection);

                std::vector<double>& w = weights[bi];
                w.assign(static_cast<std::size_t>(m_count), 1.0);
                if (mode_ == TrainerMode::Cpsc) {
                    std::vector<FeatureVector> uni_probs(static_cast<std::size_t>(m_count));
                    for (int m = 0; m < m_count; ++m)
                        uni_probs[static_cast<std::size_t>(m)] =
                            cache.mods[static_cast<std::size_t>(m)].uni_probs;
                    const std::vector<double> rho =
                        modality_reliability_from_probs(uni_probs, cache.fused_probs, conformal);
                    for (int m = 0; m < m_count; ++m) {
                        w[static_cast<std::size_t>(m)] = gsc_weight(rho[static_cast<std::size_t>(m)], cfg_.gsc);
                        sum_rho[static_cast<std::size_t>(m)] += rho[static_cast<std::size_t>(m)];
                        sum_w[static_cast<std::size_t>(m)] += w[static_cast<std::size_t>(m)];
                    }
                }

                double total_i = cross_entropy(cache.fused_probs, s.label);
                sum_mul += total_i;
                if (argmax(cache.fused_probs) == s.label) ++correct_fused;
                for (int m = 0; m < m_count; ++m) {
                    const ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
                    const double uni = cross_entropy(mc.uni_probs, s.label);
                    sum_uni[static_cast<std::size_t>(m)] += uni;
                    if (argmax(mc.uni_probs) == s.label) ++correct_uni[static_cast<std::size_t>(m)];
                    if (mode_ == TrainerMode::Cpsc && (cfg_.lambda1 != 0.0 || cfg_.lambda2 != 0.0)) {
                        const DiversityLossTerms div =
                            diversity_loss(mc.h, mc.comps, cfg_.lambda1, cfg_.lambda2);
                        sum_div[static_cast<std::size_t>(m)] += div.total;
                        total_i += div.total;
                    }
                    total_i += w[static_cast<std::size_t>(m)] * uni;
                }
                batch_loss += total_i;
                ++seen;
            }
            batch_loss *= inv_batch;
            if (!std::isfinite(batch_loss)) {
                dump_diagnostics(epoch, static_cast<int>(b), caches);
                throw NumericError("train_epoch: non-finite batch loss at epoch " +
                                   std::to_string(epoch));
            }
            sum_total += batch_loss * static_cast<double>(batch.size());

            // Backward: per-head seeds, GSC weights applied as constants.
            for (std::size_t bi = 0; bi < batch.size(); ++bi) {
                HeadSeeds seeds;
                seeds.fused = inv_batch;
                seeds.unimodal.assign(static_cast<std::size_t>(m_count), 0.0);
                for (int m = 0; m < m_count; ++m)
                    seeds.unimodal[static_cast<std::size_t>(m)] =
                        inv_batch * weights[bi][static_cast<std::size_t>(m)];
                if (mode_ == TrainerMode::Cpsc && (cfg_.lambda1 != 0.0 || cfg_.lambda2 != 0.0)) {
                    ExtraGrads extra;
                    extra.dh.assign(static_cast<std::size_t>(m_count), FeatureVector());
                    extra.dc.assign(static_cast<std::size_t>(m_count), {});
                    for (int m = 0; m < m_count; ++m) {
                        const ModalityCache& mc = caches[bi].mods[static_cast<std::size_t>(m)];
                        diversity_loss_backward(mc.h, mc.comps, cfg_.lambda1, cfg_.lambda2,
                                                inv_batch, extra.dh[static_cast<std::size_t>(m)],
                                                extra.dc[static_cast<std::size_t>(m)]);
                    }
                    backward_sample(model, caches[bi], seeds, &extra);
                } else {
                    backward_sample(model, caches[bi], seeds);
                }
            }

            if (b == 0) first_batch_variance(rep, caches, weights);
            if (cfg_.step_mode == StepMode::PerBatch) apply_step();
        }
        if (cfg_.step_mode == StepMode::PerEpoch) apply_step();

        const double inv_seen = 1.0 / static_cast<double>(seen);
        rep.loss_total = sum_total * inv_seen;
        rep.loss_mul = sum_mul * inv_seen;
        rep.acc_train_fused = static_cast<double>(correct_fused) * inv_seen;
        for (int m = 0; m < m_count; ++m) {
            rep.loss_uni[static_cast<std::size_t>(m)] = sum_uni[static_cast<std::size_t>(m)] * inv_seen;
            rep.loss_div[static_cast<std::size_t>(m)] = sum_div[static_cast<std::size_t>(m)] * inv_seen;
            rep.acc_train_uni[static_cast<std::size_t>(m)] =
                static_cast<double>(correct_uni[static_cast<std::size_t>(m)]) * inv_seen;
            rep.rho_train[static_cast<std::size_t>(m)] = sum_rho[static_cast<std::size_t>(m)] * inv_seen;
            rep.w_mean[static_cast<std::size_t>(m)] =
                mode_ == TrainerMode::Cpsc ? sum_w[static_cast<std::size_t>(m)] * inv_seen : 1.0;
            rep.comp_rel_mean[static_cast<std::size_t>(m)] =
                sum_rel[static_cast<std::size_t>(m)] * inv_seen /
                static_cast<double>(model.config.component_count);
        }
        fill_eval_metrics(rep);
        return rep;
    }

    /// Recomputes calibration nonconformity scores with the current parameters
    /// over the RSC-free fused path (the same path used at test time) and
    /// replaces the conformal state wholesale.
    void cp_refresh() {
        std::vector<double> scores;
        scores.reserve(split_.cal.size());
        for (int idx : split_.cal) {
            const LabeledSample& s = pool_.samples[static_cast<std::size_t>(idx)];
            const FeatureVector probs = raw_fused_probs(s);
            scores.push_back(nonconformity(probs, s.label));
        }
        if (scores.empty()) throw CalibrationError("cp_refresh: empty calibration set");
        conformal = ConformalState::from_scores(std::move(scores), cfg_.alpha,
                                                conformal.version + 1);
    }

    /// Full protocol: warm-up, then self-calibration (or baseline) epochs with
    /// periodic conformal refreshes at epoch end. The optional hook fires at
    /// "warmup_end" and "end" (checkpointing lives there).
    void run(const std::function<void(const Trainer&, const std::string&)>& hook = {}) {
        warmup();
        if (hook) hook(*this, "warmup_end");
        for (int epoch = cfg_.warmup_epochs + 1; epoch <= cfg_.total_epochs; ++epoch) {
            reports_.push_back(train_epoch(epoch));
            if ((epoch - cfg_.warmup_epochs) % cfg_.cp_update_interval == 0) cp_refresh();
        }
        if (hook) hook(*this, "end");
    }

    /// Inference. Raw mode feeds encoder outputs straight to the fusion head;
    /// Rsc mode decomposes, scores against the raw-path predicted label with
    /// the retained conformal state, reconstructs from the top-K components
    /// and fuses those.
    std::pair<FeatureVector, int> infer(const std::vector<FeatureVector>& inputs,
                                        InferMode mode) const {
        if (mode == InferMode::Raw) {
            SampleCache cache = forward_repr(model, inputs, -1);
            fuse_cached(model, cache, false);
            return {cache.fused_probs, argmax(cache.fused_probs)};
        }
        if (!conformal.calibrated)
            throw ConfigError("infer: rsc mode requires a calibrated conformal state");
        SampleCache cache = forward_repr(model, inputs, -1);
        fuse_cached(model, cache, false);
        const int target = argmax(cache.fused_probs);
        const int m_count = model.config.modality_count;
        std::vector<std::vector<int>> selection(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m) {
            ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
            decompose_cached(model, m, mc);
            std::vector<double> label_scores;
            const std::vector<double> rel =
                score_components(model, conformal, m, mc.comps, target, &label_scores);
            const bool all_zero =
                std::all_of(rel.begin(), rel.end(), [](double r) { return r == 0.0; });
            selection[static_cast<std::size_t>(m)] =
                all_zero ? select_by_lowest_score(label_scores, model.config.top_k)
                         : select_top_k(rel, model.config.top_k);
        }
        finish_calibrated(model, cache, selection);
        return {cache.fused_probs, argmax(cache.fused_probs)};
    }

    // --- observers -------------------------------------------------------

    const std::vector<EpochReport>& reports() const { return reports_; }
    const SplitIndices& split() const { return split_; }
    const TrainConfig& config() const { return cfg_; }
    TrainerMode mode() const { return mode_; }

    /// Mean GSC reliability per modality over a sample list, via the
    /// training-style calibrated path (component scoring against the true
    /// label, reliability against the fused prediction).
    std::vector<double> mean_rho(const std::vector<const LabeledSample*>& samples) const {
        const int m_count = model.config.modality_count;
        std::vector<double> acc(static_cast<std::size_t>(m_count), 0.0);
        if (samples.empty() || !conformal.calibrated) return acc;
        for (const LabeledSample* s : samples) {
            SampleCache cache = forward_repr(model, s->features, s->label);
            std::vector<std::vector<int>> selection(static_cast<std::size_t>(m_count));
            for (int m = 0; m < m_count; ++m) {
                ModalityCache& mc = cache.mods[static_cast<std::size_t>(m)];
                decompose_cached(model, m, mc);
                if (mode_ == TrainerMode::Cpsc) {
                    std::vector<double> label_scores;
                    const std::vector<double> rel =
                        score_components(model, conformal, m, mc.comps, s->label, &label_scores);
                    const bool all_zero =
                        std::all_of(rel.begin(), rel.end(), [](double r) { return r == 0.0; });
                    selection[static_cast<std::size_t>(m)] =
                        all_zero ? select_by_lowest_score(label_scores, model.config.top_k)
                                 : select_top_k(rel, model.config.top_k);
                } else {
                    selection[static_cast<std::size_t>(m)].resize(
                        static_cast<std::size_t>(model.config.component_count));
                    std::iota(selection[static_cast<std::size_t>(m)].begin(),
                              selection[static_cast<std::size_t>(m)].end(), 0);
                }
            }
            finish_calibrated(model, cache, selection);
            std::vector<FeatureVector> uni_probs(static_cast<std::size_t>(m_count));
            for (int m = 0; m < m_count; ++m)
                uni_probs[static_cast<std::size_t>(m)] =
                    cache.mods[static_cast<std::size_t>(m)].uni_probs;
            const std::vector<double> rho =
                modality_reliability_from_probs(uni_probs, cache.fused_probs, conformal);
            for (int m = 0; m < m_count; ++m)
                acc[static_cast<std::size_t>(m)] += rho[static_cast<std::size_t>(m)];
        }
        for (double& v : acc) v /= static_cast<double>(samples.size());
        return acc;
    }

    CpscModel model;
    ConformalState conformal;

private:
    EpochReport make_report_shell(int epoch, std::string phase) const {
        EpochReport rep;
        rep.epoch = epoch;
        rep.phase = std::move(phase);
        const std::size_t m = static_cast<std::size_t>(model.config.modality_count);
        rep.loss_uni.assign(m, 0.0);
        rep.loss_div.assign(m, 0.0);
        rep.acc_train_uni.assign(m, 0.0);
        rep.acc_test_uni.assign(m, 0.0);
        rep.rho_train.assign(m, 0.0);
        rep.rho_test.assign(m, 0.0);
        rep.w_mean.assign(m, mode_ == TrainerMode::Cpsc ? 0.0 : 1.0);
        rep.comp_rel_mean.assign(m, 0.0);
        rep.rel_hist.assign(m, std::vector<int>(10, 0));
        rep.weighted_var.assign(m, 0.0);
        rep.unweighted_var.assign(m, 0.0);
        return rep;
    }

    std::vector<std::vector<int>> make_batches(int epoch) const {
        std::vector<int> order = split_.train;
        CounterRng rng(rng_key(cfg_.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        std::vector<std::vector<int>> batches;
        for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg_.batch_size)) {
            const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(cfg_.batch_size));
            batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
        }
        return batches;
    }

    FeatureVector raw_fused_probs(const LabeledSample& s) const {
        std::vector<FeatureVector> feats(static_cast<std::size_t>(model.config.modality_count));
        for (int m = 0; m < model.config.modality_count; ++m)
            feats[static_cast<std::size_t>(m)] = encode(model, m, s.features[static_cast<std::size_t>(m)]);
        return fuse_predict(model, feats);
    }

    EpochReport run_warmup_epoch(int epoch) {
        EpochReport rep = make_report_shell(epoch, "warmup");
        const std::vector<std::vector<int>> batches = make_batches(epoch);
        double sum_mul = 0.0;
        long correct = 0, seen = 0;
        for (const std::vector<int>& batch : batches) {
            const double inv_batch = 1.0 / static_cast<double>(batch.size());
            std::vector<SampleCache> caches(batch.size());
            double batch_loss = 0.0;
            for (std::size_t bi = 0; bi < batch.size(); ++bi) {
                const LabeledSample& s = pool_.samples[static_cast<std::size_t>(batch[bi])];
                caches[bi] = forward_raw(model, s.features, s.label);
                const double ce = cross_entropy(caches[bi].fused_probs, s.label);
                sum_mul += ce;
                batch_loss += ce;
                if (argmax(caches[bi].fused_probs) == s.label) ++correct;
                ++seen;
            }
            batch_loss *= inv_batch;
            if (!std::isfinite(batch_loss)) {
                dump_diagnostics(epoch, -1, caches);
                throw NumericError("warmup: non-finite batch loss at epoch " + std::to_string(epoch));
            }
            for (std::size_t bi = 0; bi < batch.size(); ++bi) {
                HeadSeeds seeds;
                seeds.fused = inv_batch;
                backward_sample(model, caches[bi], seeds);
            }
            if (cfg_.step_mode == StepMode::PerBatch) apply_step();
        }
        if (cfg_.step_mode == StepMode::PerEpoch) apply_step();
        rep.loss_total = sum_mul / static_cast<double>(seen);
        rep.loss_mul = rep.loss_total;
        rep.acc_train_fused = static_cast<double>(correct) / static_cast<double>(seen);
        fill_eval_metrics(rep);
        return rep;
    }

    void apply_step() {
        std::vector<ParamBlock*> params = model.param_blocks();
        if (cfg_.clip_norm > 0.0) {
            double sq = 0.0;
            for (const ParamBlock* p : params)
                for (double g : p->grad.data) sq += g * g;
            const double norm = std::sqrt(sq);
            if (norm > cfg_.clip_norm) {
                const double scale = cfg_.clip_norm / norm;
                for (ParamBlock* p : params)
                    for (double& g : p->grad.data) g *= scale;
            }
        }
        step(params, cfg_.optimizer);
        model.zero_grads();
    }

    /// Test-split metrics: raw-path fused/unimodal accuracy, coverage audit at
    /// the current quantile and held-out GSC reliability.
    void fill_eval_metrics(EpochReport& rep) {
        const int m_count = model.config.modality_count;
        if (test_.samples.empty()) return;
        std::vector<FeatureVector> fused_rows;
        fused_rows.reserve(test_.samples.size());
        std::vector<int> labels;
        labels.reserve(test_.samples.size());
        long correct_fused = 0;
        std::vector<long> correct_uni(static_cast<std::size_t>(m_count), 0);
        for (const LabeledSample& s : test_.samples) {
            std::vector<FeatureVector> feats(static_cast<std::size_t>(m_count));
            for (int m = 0; m < m_count; ++m) {
                feats[static_cast<std::size_t>(m)] =
                    encode(model, m, s.features[static_cast<std::size_t>(m)]);
                const FeatureVector uni =
                    unimodal_predict(model, m, feats[static_cast<std::size_t>(m)]);
                if (argmax(uni) == s.label) ++correct_uni[static_cast<std::size_t>(m)];
            }
            const FeatureVector probs = fuse_predict(model, feats);
            if (argmax(probs) == s.label) ++correct_fused;
            fused_rows.push_back(probs);
            labels.push_back(s.label);
        }
        const double inv = 1.0 / static_cast<double>(test_.samples.size());
        rep.acc_test_fused = static_cast<double>(correct_fused) * inv;
        for (int m = 0; m < m_count; ++m)
            rep.acc_test_uni[static_cast<std::size_t>(m)] =
                static_cast<double>(correct_uni[static_cast<std::size_t>(m)]) * inv;
        if (conformal.calibrated) {
            rep.q_hat = conformal.q_hat;
            rep.cp_version = conformal.version;
            const CoverageStats stats = coverage_audit(fused_rows, labels, conformal.q_hat);
            rep.coverage = stats.coverage;
            rep.mean_set_size = stats.mean_set_size;
            std::vector<const LabeledSample*> ptrs;
            ptrs.reserve(test_.samples.size());
            for (const LabeledSample& s : test_.samples) ptrs.push_back(&s);
            rep.rho_test = mean_rho(ptrs);
        }
    }

    /// Per-sample unimodal-gradient spread on the first batch of the epoch,
    /// reported per modality as trace-of-covariance for the weighted and
    /// unweighted estimators.
    void first_batch_variance(EpochReport& rep, const std::vector<SampleCache>& caches,
                              const std::vector<std::vector<double>>& weights) {
        if (caches.size() < 2) return;
        const int m_count = model.config.modality_count;
        CpscModel scratch = model; // values copied; grads used as per-sample buffers
        for (int m = 0; m < m_count; ++m) {
            std::vector<FeatureVector> grads;
            std::vector<double> w;
            grads.reserve(caches.size());
            for (std::size_t i = 0; i < caches.size(); ++i) {
                scratch.zero_grads();
                HeadSeeds seeds;
                seeds.unimodal.assign(static_cast<std::size_t>(m_count), 0.0);
                seeds.unimodal[static_cast<std::size_t>(m)] = 1.0;
                backward_sample(scratch, caches[i], seeds);
                FeatureVector flat;
                for (const ParamBlock* p :
                     {&scratch.uni_w[m], &scratch.uni_b[m], &scratch.decomp[m],
                      &scratch.encoders[m].w1, &scratch.encoders[m].b1, &scratch.encoders[m].w2,
                      &scratch.encoders[m].b2})
                    flat.insert(flat.end(), p->grad.data.begin(), p->grad.data.end());
                grads.push_back(std::move(flat));
                w.push_back(weights[i][static_cast<std::size_t>(m)]);
            }
            const VarianceDiagnostic diag = variance_diagnostic(grads, w);
            rep.weighted_var[static_cast<std::size_t>(m)] = diag.weighted_var;
            rep.unweighted_var[static_cast<std::size_t>(m)] = diag.unweighted_var;
        }
    }

    void dump_diagnostics(int epoch, int batch, const std::vector<SampleCache>& caches) const {
        std::cerr << "[cpsc] numeric failure: epoch=" << epoch << " batch=" << batch << "\n";
        for (std::size_t i = 0; i < caches.size(); ++i) {
            std::cerr << "  sample " << i << " label=" << caches[i].label << " fused=";
            for (double p : caches[i].fused_probs) std::cerr << p << " ";
            std::cerr << "\n";
        }
        std::cerr << "  param norms:";
        for (const ParamBlock* p : model.param_blocks()) {
            double nrm = 0.0;
            for (double v : p->value.data) nrm += v * v;
            std::cerr << " " << std::sqrt(nrm);
        }
        std::cerr << "\n";
    }

    TrainConfig cfg_;
    TrainerMode mode_;
    const Dataset& pool_;
    const Dataset& test_;
    SplitIndices split_;
    std::vector<EpochReport> reports_;
};

} // namespace cpsc
