// Command-line harness: training runs, conformal coverage audits, gradient
// checks and parameter sweeps over the synthetic multimodal benchmark.
//
// Exit codes: 0 success, 2 usage/config error, 3 numeric error,
// 4 calibration error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpsc/cpsc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCalibration = 4;

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::string cur;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!cur.empty()) {
                seeds.push_back(std::stoull(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (seeds.empty()) throw cpsc::ConfigError("empty seed list");
    return seeds;
}

std::vector<std::uint64_t> effective_seeds(const std::string& seeds_csv) {
    if (const char* env = std::getenv("CPSC_SEED"); env != nullptr && *env != '\0')
        return {std::stoull(std::string(env))};
    if (!seeds_csv.empty()) return parse_seed_list(seeds_csv);
    return {0, 1, 2, 3, 4};
}

void apply_ablations(cpsc::RunConfig& cfg, const std::vector<std::string>& ablations) {
    for (const std::string& a : ablations) {
        if (a == "rsc") {
            cfg.top_k = cfg.component_count;
            cfg.train.lambda1 = 0.0;
            cfg.train.lambda2 = 0.0;
        } else if (a == "gsc") {
            cfg.train.gsc.a = 0.0;
            cfg.train.gsc.b = 1.0;
        } else if (a == "warmup") {
            cfg.train.warmup_epochs = 0;
        } else if (a == "div") {
            cfg.train.lambda1 = 0.0;
            cfg.train.lambda2 = 0.0;
        } else {
            throw cpsc::ConfigError("unknown ablation: " + a +
                                    " (expected rsc, gsc, warmup or div)");
        }
    }
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) return out;
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(acc / static_cast<double>(v.size()));
    return out;
}

// --------------------------------------------------------------------------
// train
// --------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& outdir,
              const std::string& seeds_csv, const std::vector<std::string>& ablations,
              bool baseline) {
    cpsc::RunConfig cfg = cpsc::load_run_config(config_path);
    apply_ablations(cfg, ablations);
    const std::vector<std::uint64_t> seeds = effective_seeds(seeds_csv);
    const cpsc::TrainerMode mode =
        baseline ? cpsc::TrainerMode::Baseline : cpsc::TrainerMode::Cpsc;
    std::filesystem::create_directories(outdir);

    cpsc::Json agg;
    agg["config"] = cpsc::echo_run_config(cfg);
    agg["trainer"] = baseline ? "baseline" : "cpsc";
    cpsc::Json per_seed = cpsc::Json::array();
    std::vector<double> fused;
    std::vector<std::vector<double>> uni(cfg.modalities.size());
    for (std::uint64_t seed : seeds) {
        const std::string dir = outdir + "/seed_" + std::to_string(seed);
        const cpsc::RunResult r = cpsc::run_training(cfg, mode, seed, dir);
        cpsc::Json row;
        row["seed"] = seed;
        row["acc_test_fused"] = r.final_eval.fused;
        for (std::size_t m = 0; m < r.final_eval.uni.size(); ++m)
            row["acc_test_m" + std::to_string(m)] = r.final_eval.uni[m];
        row["coverage"] = r.final_coverage;
        row["q_hat"] = r.final_q_hat;
        per_seed.push_back(row);
        fused.push_back(r.final_eval.fused);
        for (std::size_t m = 0; m < r.final_eval.uni.size(); ++m)
            uni[m].push_back(r.final_eval.uni[m]);
        std::cout << "seed " << seed << ": acc_test_fused=" << r.final_eval.fused << "\n";
    }
    agg["runs"] = per_seed;
    const MeanStd f = mean_std(fused);
    agg["mean_acc_test_fused"] = f.mean;
    agg["std_acc_test_fused"] = f.stddev;
    for (std::size_t m = 0; m < uni.size(); ++m) {
        const MeanStd u = mean_std(uni[m]);
        agg["mean_acc_test_m" + std::to_string(m)] = u.mean;
        agg["std_acc_test_m" + std::to_string(m)] = u.stddev;
    }
    std::ofstream os = cpsc::open_out(outdir + "/summary.json");
    os << agg.dump(2) << "\n";
    std::cout << "mean acc_test_fused over " << seeds.size() << " seeds: " << f.mean << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------------
// coverage-audit
// --------------------------------------------------------------------------

int cmd_coverage_audit(const std::string& config_path, const std::string& outdir,
                       const std::string& seeds_csv, int reps, int cal_size, int test_size,
                       const std::string& checkpoint) {
    cpsc::RunConfig cfg = cpsc::load_run_config(config_path);
    const std::vector<std::uint64_t> seeds = effective_seeds(seeds_csv);
    const std::uint64_t seed = seeds.front();
    std::filesystem::create_directories(outdir);

    // Frozen model: either a stored checkpoint or a fresh warm-up.
    cpsc::CpscModel model = cpsc::CpscModel::init(cfg.resolved_model(), seed);
    if (!checkpoint.empty()) {
        if (!std::filesystem::exists(checkpoint))
            throw cpsc::ConfigError("checkpoint not found: " + checkpoint);
        cpsc::load_checkpoint(model, checkpoint);
    } else {
        cpsc::RunConfig warm = cfg;
        warm.train.total_epochs = std::max(1, warm.train.warmup_epochs + 1);
        const cpsc::RunData data = cpsc::build_run_data(warm, seed);
        cpsc::Trainer trainer(warm.resolved_model(), warm.train, cpsc::TrainerMode::Cpsc,
                              data.pool, data.test);
        trainer.warmup();
        model = trainer.model;
    }

    const double alpha = cfg.train.alpha;
    const double slack = 3.0 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(test_size));
    const double threshold = 1.0 - alpha - slack;
    std::ofstream os = cpsc::open_out(outdir + "/coverage_audit.csv");
    os << "rep,alpha,q_hat,coverage,mean_set_size\n";
    int passed = 0;
    for (int rep = 0; rep < reps; ++rep) {
        cpsc::GenSpec spec;
        spec.class_count = cfg.class_count;
        spec.samples = cal_size + test_size;
        spec.modalities = cfg.modalities;
        spec.seed = cpsc::rng_key(cfg.effective_data_seed(), "audit", static_cast<std::uint64_t>(rep));
        const cpsc::Dataset fresh = cpsc::generate(spec);

        std::vector<double> scores;
        std::vector<cpsc::FeatureVector> probs_rows;
        std::vector<int> labels;
        for (int i = 0; i < spec.samples; ++i) {
            const cpsc::LabeledSample& s = fresh.samples[static_cast<std::size_t>(i)];
            std::vector<cpsc::FeatureVector> feats(cfg.modalities.size());
            for (int m = 0; m < static_cast<int>(cfg.modalities.size()); ++m)
                feats[static_cast<std::size_t>(m)] =
                    cpsc::encode(model, m, s.features[static_cast<std::size_t>(m)]);
            const cpsc::FeatureVector probs = cpsc::fuse_predict(model, feats);
            if (i < cal_size) {
                scores.push_back(cpsc::nonconformity(probs, s.label));
            } else {
                probs_rows.push_back(probs);
                labels.push_back(s.label);
            }
        }
        const double q_hat = cpsc::calibrate(scores, alpha);
        const cpsc::CoverageStats stats = cpsc::coverage_audit(probs_rows, labels, q_hat);
        if (stats.coverage >= threshold) ++passed;
        os << rep << "," << cpsc::fmt_double(alpha) << "," << cpsc::fmt_double(q_hat) << ","
           << cpsc::fmt_double(stats.coverage) << "," << cpsc::fmt_double(stats.mean_set_size)
           << "\n";
        std::cout << "rep " << rep << ": q_hat=" << q_hat << " coverage=" << stats.coverage
                  << " set_size=" << stats.mean_set_size << "\n";
    }
    std::cout << "coverage >= " << threshold << " in " << passed << "/" << reps
              << " resamplings\n";
    return kExitOk;
}

// --------------------------------------------------------------------------
// gradcheck
// --------------------------------------------------------------------------

int cmd_gradcheck(const std::string& config_path, int inits) {
    cpsc::RunConfig cfg;
    if (!config_path.empty()) cfg = cpsc::load_run_config(config_path);
    // Small dimensions keep the finite-difference sweep exact and fast.
    cfg.feature_dim = std::min(cfg.feature_dim, 8);
    cfg.component_count = std::min(cfg.component_count, 4);
    cfg.top_k = std::min(cfg.top_k, cfg.component_count);
    for (int& h : cfg.hidden_dims) h = std::min(h, 8);
    for (cpsc::ModalitySpec& m : cfg.modalities) m.input_dim = std::min(m.input_dim, 8);

    const cpsc::ModelConfig mc = cfg.resolved_model();
    double worst_overall = 0.0;
    bool ok = true;
    for (int init = 0; init < inits; ++init) {
        cpsc::GenSpec spec;
        spec.class_count = cfg.class_count;
        spec.samples = 54; // 4-sample batch + 50 calibration samples
        spec.modalities = cfg.modalities;
        spec.seed = cpsc::rng_key(cfg.effective_data_seed(), "gradcheck", static_cast<std::uint64_t>(init));
        const cpsc::Dataset data = cpsc::generate(spec);

        cpsc::CpscModel model = cpsc::CpscModel::init(mc, 1000 + static_cast<std::uint64_t>(init));
        std::vector<const cpsc::LabeledSample*> batch;
        for (int i = 0; i < 4; ++i) batch.push_back(&data.samples[static_cast<std::size_t>(i)]);
        std::vector<double> scores;
        for (int i = 4; i < spec.samples; ++i) {
            const cpsc::LabeledSample& s = data.samples[static_cast<std::size_t>(i)];
            std::vector<cpsc::FeatureVector> feats(cfg.modalities.size());
            for (int m = 0; m < mc.modality_count; ++m)
                feats[static_cast<std::size_t>(m)] =
                    cpsc::encode(model, m, s.features[static_cast<std::size_t>(m)]);
            scores.push_back(cpsc::nonconformity(cpsc::fuse_predict(model, feats), s.label));
        }
        const cpsc::ConformalState st = cpsc::ConformalState::from_scores(scores, cfg.train.alpha);
        const cpsc::FixedBatchChoices choices =
            cpsc::compute_batch_choices(model, st, batch, cfg.train.gsc);

        model.zero_grads();
        cpsc::training_backward_fixed(model, batch, choices, cfg.train.lambda1, cfg.train.lambda2);
        const auto loss_fn = [&]() {
            return cpsc::training_loss_fixed(model, batch, choices, cfg.train.lambda1,
                                             cfg.train.lambda2);
        };
        const std::vector<cpsc::ParamBlock*> blocks = model.param_blocks();
        const std::vector<cpsc::Tensor2D> numeric = cpsc::finite_diff_grad(loss_fn, blocks, 1e-5);
        const std::vector<std::string> names = model.param_names();
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const double err = cpsc::max_rel_error(blocks[b]->grad, numeric[b]);
            worst_overall = std::max(worst_overall, err);
            if (err > 1e-4) {
                ok = false;
                std::cout << "FAIL init " << init << " block " << names[b]
                          << " rel_err=" << err << "\n";
            }
        }
    }
    std::cout << (ok ? "gradcheck PASS" : "gradcheck FAIL") << " (worst rel err "
              << worst_overall << " over " << inits << " inits)\n";
    return ok ? kExitOk : kExitNumeric;
}

// --------------------------------------------------------------------------
// sweep
// --------------------------------------------------------------------------

int cmd_sweep(const std::string& config_path, const std::string& outdir,
              const std::string& axis, const std::string& values_csv,
              const std::string& seeds_csv) {
    cpsc::RunConfig base = cpsc::load_run_config(config_path);
    const std::vector<std::uint64_t> seeds = effective_seeds(seeds_csv);
    std::filesystem::create_directories(outdir);
    const int m_count = static_cast<int>(base.modalities.size());

    std::vector<std::string> values;
    {
        std::string cur;
        for (char c : values_csv + ",") {
            if (c == ',') {
                if (!cur.empty()) values.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
    }

    std::ofstream runs = cpsc::open_out(outdir + "/sweep_runs.csv");
    runs << "axis,value,variant,trainer,seed,acc_test_fused";
    for (int m = 0; m < m_count; ++m) runs << ",acc_test_m" << m;
    runs << "\n";

    struct Cell {
        std::vector<double> fused;
        std::vector<std::vector<double>> uni;
    };
    std::map<std::string, Cell> cells;
    auto record = [&](const std::string& value, const std::string& variant,
                      const std::string& trainer, std::uint64_t seed, double fused,
                      const std::vector<double>& uni) {
        runs << axis << "," << value << "," << variant << "," << trainer << "," << seed << ","
             << cpsc::fmt_double(fused);
        for (double u : uni) runs << "," << cpsc::fmt_double(u);
        runs << "\n";
        Cell& cell = cells[value + "," + variant + "," + trainer];
        if (cell.uni.empty()) cell.uni.resize(uni.size());
        cell.fused.push_back(fused);
        for (std::size_t m = 0; m < uni.size(); ++m) cell.uni[m].push_back(uni[m]);
    };

    if (axis == "optimizer") {
        if (values.empty()) values = {"sgd", "adam", "adagrad"};
        for (const std::string& value : values) {
            cpsc::RunConfig cfg = base;
            cfg.train.optimizer.kind = cpsc::optimizer_kind_from_string(value);
            for (std::uint64_t seed : seeds) {
                for (const cpsc::TrainerMode mode :
                     {cpsc::TrainerMode::Baseline, cpsc::TrainerMode::Cpsc}) {
                    const cpsc::RunResult r = cpsc::run_training(cfg, mode, seed);
                    record(value, "-", mode == cpsc::TrainerMode::Cpsc ? "cpsc" : "baseline",
                           seed, r.final_eval.fused, r.final_eval.uni);
                }
            }
        }
    } else if (axis == "cp_interval") {
        if (values.empty()) values = {"1", "2", "5", "10"};
        for (const std::string& value : values) {
            cpsc::RunConfig cfg = base;
            cfg.train.cp_update_interval = std::stoi(value);
            for (std::uint64_t seed : seeds) {
                const cpsc::RunResult r = cpsc::run_training(cfg, cpsc::TrainerMode::Cpsc, seed);
                record(value, "-", "cpsc", seed, r.final_eval.fused, r.final_eval.uni);
            }
        }
    } else if (axis == "alpha") {
        if (values.empty()) values = {"0.05", "0.1", "0.2"};
        for (const std::string& value : values) {
            cpsc::RunConfig cfg = base;
            cfg.train.alpha = std::stod(value);
            for (std::uint64_t seed : seeds) {
                const cpsc::RunResult r = cpsc::run_training(cfg, cpsc::TrainerMode::Cpsc, seed);
                record(value, "-", "cpsc", seed, r.final_eval.fused, r.final_eval.uni);
            }
        }
    } else if (axis == "noise") {
        if (values.empty()) values = {"0", "5", "10"};
        // Train on clean data once per (trainer, seed); evaluate under each
        // test-time corruption level and kind.
        std::vector<int> targets = base.corruption.target_modalities;
        if (targets.empty()) targets = {0};
        for (std::uint64_t seed : seeds) {
            for (const cpsc::TrainerMode mode :
                 {cpsc::TrainerMode::Baseline, cpsc::TrainerMode::Cpsc}) {
                cpsc::RunConfig cfg = base;
                cfg.corruption.kind = cpsc::CorruptionKind::None;
                cfg.train.seed = seed;
                const cpsc::RunData data = cpsc::build_run_data(cfg, seed);
                cpsc::Trainer trainer(cfg.resolved_model(), cfg.train, mode, data.pool,
                                      data.test);
                trainer.run();
                const std::string trainer_name =
                    mode == cpsc::TrainerMode::Cpsc ? "cpsc" : "baseline";
                for (const std::string& value : values) {
                    const double eps = std::stod(value);
                    for (const cpsc::CorruptionKind kind :
                         {cpsc::CorruptionKind::Gaussian, cpsc::CorruptionKind::SaltPepper}) {
                        const cpsc::Dataset corrupted = cpsc::corrupted_copy(
                            data.test, kind, eps, targets,
                            cpsc::rng_key(seed, "sweep_noise", static_cast<std::uint64_t>(eps * 100)));
                        const cpsc::EvalAccuracy acc = cpsc::evaluate_raw(trainer.model, corrupted);
                        record(value, cpsc::to_string(kind), trainer_name, seed, acc.fused,
                               acc.uni);
                    }
                }
            }
        }
    } else {
        throw cpsc::ConfigError("unknown sweep axis: " + axis +
                                " (expected optimizer, cp_interval, alpha or noise)");
    }

    std::ofstream agg = cpsc::open_out(outdir + "/sweep_agg.csv");
    agg << "axis,value,variant,trainer,n_seeds,mean_acc_test_fused,std_acc_test_fused";
    for (int m = 0; m < m_count; ++m) agg << ",mean_acc_test_m" << m << ",std_acc_test_m" << m;
    agg << "\n";
    for (const auto& [key, cell] : cells) {
        const MeanStd f = mean_std(cell.fused);
        agg << axis << "," << key << "," << cell.fused.size() << "," << cpsc::fmt_double(f.mean)
            << "," << cpsc::fmt_double(f.stddev);
        for (const std::vector<double>& u : cell.uni) {
            const MeanStd s = mean_std(u);
            agg << "," << cpsc::fmt_double(s.mean) << "," << cpsc::fmt_double(s.stddev);
        }
        agg << "\n";
    }
    std::cout << "sweep complete: " << cells.size() << " cells over " << seeds.size()
              << " seeds\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal predictive self-calibration trainer and audit harness"};
    app.require_subcommand(1);

    std::string config_path, outdir, seeds_csv, values_csv, axis, checkpoint;
    std::vector<std::string> ablations;
    bool baseline = false;
    int reps = 20, cal_size = 500, test_size = 2000, inits = 10;

    CLI::App* train = app.add_subcommand("train", "Train on the synthetic benchmark");
    train->add_option("--config", config_path, "Run config (JSON)")->required();
    train->add_option("--out", outdir, "Output directory")->required();
    train->add_option("--seeds", seeds_csv, "Comma-separated seed list (default 0..4)");
    train->add_option("--ablate", ablations, "Disable a module: rsc, gsc, warmup, div");
    train->add_flag("--baseline", baseline, "Run the plain-CE baseline trainer");

    CLI::App* audit = app.add_subcommand("coverage-audit", "Frozen-model coverage resampling audit");
    audit->add_option("--config", config_path, "Run config (JSON)")->required();
    audit->add_option("--out", outdir, "Output directory")->required();
    audit->add_option("--seeds", seeds_csv, "Seed list; the first seed is used");
    audit->add_option("--reps", reps, "Number of cal/test resamplings");
    audit->add_option("--cal", cal_size, "Calibration samples per resampling");
    audit->add_option("--test", test_size, "Test samples per resampling");
    audit->add_option("--checkpoint", checkpoint, "Audit a stored checkpoint instead of a fresh warm-up");

    CLI::App* grad = app.add_subcommand("gradcheck", "Analytic-vs-finite-difference gradient check");
    grad->add_option("--config", config_path, "Run config (JSON); dims are clamped small");
    grad->add_option("--inits", inits, "Random initializations to test");

    CLI::App* sweep = app.add_subcommand("sweep", "Cartesian sweep over one axis x seeds");
    sweep->add_option("--config", config_path, "Run config (JSON)")->required();
    sweep->add_option("--out", outdir, "Output directory")->required();
    sweep->add_option("--axis", axis, "optimizer | cp_interval | alpha | noise")->required();
    sweep->add_option("--values", values_csv, "Comma-separated axis values");
    sweep->add_option("--seeds", seeds_csv, "Comma-separated seed list (default 0..4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, outdir, seeds_csv, ablations, baseline);
        if (audit->parsed())
            return cmd_coverage_audit(config_path, outdir, seeds_csv, reps, cal_size, test_size,
                                      checkpoint);
        if (grad->parsed()) return cmd_gradcheck(config_path, inits);
        if (sweep->parsed()) return cmd_sweep(config_path, outdir, axis, values_csv, seeds_csv);
    } catch (const cpsc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const cpsc::CalibrationError& e) {
        std::cerr << "calibration error: " << e.what() << "\n";
        return kExitCalibration;
    } catch (const cpsc::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const cpsc::DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const cpsc::IndexError& e) {
        std::cerr << "index error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
