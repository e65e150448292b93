#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cpsc/checkpoint.hpp"
#include "cpsc/config.hpp"
#include "cpsc/metrics.hpp"
#include "cpsc/synth.hpp"
#include "cpsc/trainer.hpp"

namespace cpsc {

struct RunData {
    Dataset pool; // train + calibration
    Dataset test;
};

/// Generates the sample pool and the held-out test split from one i.i.d. law
/// (the test split is the tail of a single generated sequence) and applies
/// the configured corruption. Train-phase corruption touches only the
/// training indices of the pool; the calibration split stays clean so it
/// remains exchangeable with clean test data.
inline RunData build_run_data(const RunConfig& cfg, std::uint64_t run_seed) {
    RunConfig effective = cfg;
    effective.train.seed = run_seed;
    const std::uint64_t data_seed = effective.effective_data_seed();

    GenSpec spec;
    spec.class_count = cfg.class_count;
    spec.samples = cfg.pool_samples + cfg.test_samples;
    spec.modalities = cfg.modalities;
    spec.seed = data_seed;
    Dataset all = generate(spec);

    RunData out;
    out.pool.spec = spec;
    out.pool.spec.samples = cfg.pool_samples;
    out.pool.prototypes = all.prototypes;
    out.test.spec = spec;
    out.test.spec.samples = cfg.test_samples;
    out.test.prototypes = all.prototypes;
    out.pool.samples.assign(all.samples.begin(), all.samples.begin() + cfg.pool_samples);
    out.test.samples.assign(all.samples.begin() + cfg.pool_samples, all.samples.end());

    if (cfg.corruption.kind != CorruptionKind::None && cfg.corruption.epsilon > 0.0) {
        if (cfg.corruption.applied_at == CorruptionPhase::Test) {
            apply_corruption(out.test, cfg.corruption, data_seed);
        } else {
            // split_data is deterministic, so the trainer will reproduce the
            // same train/cal partition and calibration samples stay clean
            const SplitIndices split =
                split_data(out.pool, cfg.train.calibration_fraction, run_seed);
            Dataset train_only;
            train_only.spec = out.pool.spec;
            train_only.prototypes = out.pool.prototypes;
            for (int idx : split.train)
                train_only.samples.push_back(out.pool.samples[static_cast<std::size_t>(idx)]);
            apply_corruption(train_only, cfg.corruption, data_seed);
            for (std::size_t i = 0; i < split.train.size(); ++i)
                out.pool.samples[static_cast<std::size_t>(split.train[i])] =
                    train_only.samples[i];
        }
    }
    return out;
}

struct EvalAccuracy {
    double fused = 0.0;
    std::vector<double> uni;
};

/// Raw-path accuracy (the default test-time path: encoder features straight
/// into the fusion head, unimodal heads on the same features).
inline EvalAccuracy evaluate_raw(const CpscModel& model, const Dataset& ds) {
    const int m_count = model.config.modality_count;
    EvalAccuracy out;
    out.uni.assign(static_cast<std::size_t>(m_count), 0.0);
    if (ds.samples.empty()) return out;
    long fused_ok = 0;
    std::vector<long> uni_ok(static_cast<std::size_t>(m_count), 0);
    for (const LabeledSample& s : ds.samples) {
        std::vector<FeatureVector> feats(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m) {
            feats[static_cast<std::size_t>(m)] =
                encode(model, m, s.features[static_cast<std::size_t>(m)]);
            if (argmax(unimodal_predict(model, m, feats[static_cast<std::size_t>(m)])) == s.label)
                ++uni_ok[static_cast<std::size_t>(m)];
        }
        if (argmax(fuse_predict(model, feats)) == s.label) ++fused_ok;
    }
    const double inv = 1.0 / static_cast<double>(ds.samples.size());
    out.fused = static_cast<double>(fused_ok) * inv;
    for (int m = 0; m < m_count; ++m)
        out.uni[static_cast<std::size_t>(m)] =
            static_cast<double>(uni_ok[static_cast<std::size_t>(m)]) * inv;
    return out;
}

/// A copy of `ds` with test-style corruption applied to the given modalities.
inline Dataset corrupted_copy(const Dataset& ds, CorruptionKind kind, double epsilon,
                              const std::vector<int>& targets, std::uint64_t seed) {
    Dataset out = ds;
    CorruptionSpec spec;
    spec.kind = kind;
    spec.epsilon = epsilon;
    spec.target_modalities = targets;
    spec.applied_at = CorruptionPhase::Test;
    apply_corruption(out, spec, seed);
    return out;
}

struct RunResult {
    std::uint64_t seed = 0;
    TrainerMode mode = TrainerMode::Cpsc;
    std::vector<EpochReport> reports;
    EvalAccuracy final_eval;                // raw-path accuracy on the test split
    std::vector<double> rho_test_warmup;    // per modality, right after CP init
    std::vector<double> rho_test_final;     // per modality, after the last epoch
    double final_q_hat = 0.0;
    double final_coverage = 0.0;
    double final_mean_set_size = 0.0;
};

/// Trains one seed end to end and (optionally) writes the run directory:
/// config echo, metric CSVs, warm-up and final checkpoints, and a JSON
/// summary. Identical (config, seed) pairs produce byte-identical outputs.
inline RunResult run_training(const RunConfig& cfg_in, TrainerMode mode, std::uint64_t seed,
                              const std::string& outdir = "") {
    RunConfig cfg = cfg_in;
    cfg.train.seed = seed;
    cfg.validate();
    const RunData data = build_run_data(cfg, seed);
    const std::string echo = echo_run_config(cfg).dump(2) + "\n";

    if (!outdir.empty()) std::filesystem::create_directories(outdir);

    Trainer trainer(cfg.resolved_model(), cfg.train, mode, data.pool, data.test);
    RunResult result;
    result.seed = seed;
    result.mode = mode;
    trainer.run([&](const Trainer& t, const std::string& phase) {
        if (phase == "warmup_end") {
            result.rho_test_warmup = t.reports().back().rho_test;
            if (!outdir.empty())
                save_checkpoint(t.model, echo, outdir + "/checkpoint_warmup.bin");
        }
    });

    result.reports = trainer.reports();
    const EpochReport& last = result.reports.back();
    result.rho_test_final = last.rho_test;
    result.final_q_hat = trainer.conformal.q_hat;
    result.final_coverage = last.coverage;
    result.final_mean_set_size = last.mean_set_size;
    result.final_eval = evaluate_raw(trainer.model, data.test);

    if (!outdir.empty()) {
        const int m_count = trainer.model.config.modality_count;
        {
            std::ofstream os = open_out(outdir + "/config.json");
            os << echo;
        }
        write_metrics_csv(result.reports, m_count, outdir + "/metrics.csv");
        write_coverage_csv(result.reports, cfg.train.alpha, outdir + "/coverage.csv");
        write_reliability_hist_csv(result.reports, outdir + "/reliability_hist.csv");
        write_gsc_csv(result.reports, outdir + "/gsc.csv");
        save_checkpoint(trainer.model, echo, outdir + "/checkpoint_final.bin");

        Json summary;
        summary["seed"] = seed;
        summary["trainer"] = mode == TrainerMode::Cpsc ? "cpsc" : "baseline";
        Json fin;
        fin["acc_test_fused"] = result.final_eval.fused;
        for (int m = 0; m < m_count; ++m)
            fin["acc_test_m" + std::to_string(m)] = result.final_eval.uni[static_cast<std::size_t>(m)];
        fin["q_hat"] = result.final_q_hat;
        fin["coverage"] = result.final_coverage;
        fin["mean_set_size"] = result.final_mean_set_size;
        for (int m = 0; m < m_count; ++m)
            fin["rho_test_m" + std::to_string(m)] =
                result.rho_test_final.empty() ? 0.0
                                              : result.rho_test_final[static_cast<std::size_t>(m)];
        summary["final"] = fin;
        summary["config"] = echo_run_config(cfg);
        std::ofstream os = open_out(outdir + "/summary.json");
        os << summary.dump(2) << "\n";
    }
    return result;
}

} // namespace cpsc
