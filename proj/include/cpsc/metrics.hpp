#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cpsc/errors.hpp"
#include "cpsc/trainer.hpp"

namespace cpsc {

/// Shortest round-trippable decimal form; keeps CSV output byte-deterministic.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open output file: " + path);
    return os;
}

/// Per-epoch metrics CSV. Columns are stable; per-modality columns carry a
/// _m<i> suffix.
inline void write_metrics_csv(const std::vector<EpochReport>& reports, int modality_count,
                              const std::string& path) {
    std::ofstream os = open_out(path);
    os << "epoch,phase,loss_total,loss_mul";
    for (int m = 0; m < modality_count; ++m) os << ",loss_uni_m" << m;
    for (int m = 0; m < modality_count; ++m) os << ",loss_div_m" << m;
    os << ",acc_train_fused";
    for (int m = 0; m < modality_count; ++m) os << ",acc_train_m" << m;
    os << ",acc_test_fused";
    for (int m = 0; m < modality_count; ++m) os << ",acc_test_m" << m;
    os << ",q_hat,cp_version,coverage,mean_set_size";
    for (int m = 0; m < modality_count; ++m) os << ",rho_train_m" << m;
    for (int m = 0; m < modality_count; ++m) os << ",rho_test_m" << m;
    for (int m = 0; m < modality_count; ++m) os << ",w_mean_m" << m;
    for (int m = 0; m < modality_count; ++m) os << ",comp_rel_mean_m" << m;
    os << "\n";
    for (const EpochReport& r : reports) {
        os << r.epoch << "," << r.phase << "," << fmt_double(r.loss_total) << ","
           << fmt_double(r.loss_mul);
        for (double v : r.loss_uni) os << "," << fmt_double(v);
        for (double v : r.loss_div) os << "," << fmt_double(v);
        os << "," << fmt_double(r.acc_train_fused);
        for (double v : r.acc_train_uni) os << "," << fmt_double(v);
        os << "," << fmt_double(r.acc_test_fused);
        for (double v : r.acc_test_uni) os << "," << fmt_double(v);
        os << "," << fmt_double(r.q_hat) << "," << r.cp_version << ","
           << fmt_double(r.coverage) << "," << fmt_double(r.mean_set_size);
        for (double v : r.rho_train) os << "," << fmt_double(v);
        for (double v : r.rho_test) os << "," << fmt_double(v);
        for (double v : r.w_mean) os << "," << fmt_double(v);
        for (double v : r.comp_rel_mean) os << "," << fmt_double(v);
        os << "\n";
    }
}

/// Coverage audit rows: epoch, alpha, q_hat, coverage, mean_set_size.
inline void write_coverage_csv(const std::vector<EpochReport>& reports, double alpha,
                               const std::string& path) {
    std::ofstream os = open_out(path);
    os << "epoch,alpha,q_hat,coverage,mean_set_size\n";
    for (const EpochReport& r : reports) {
        if (r.cp_version == 0) continue; // not calibrated yet
        os << r.epoch << "," << fmt_double(alpha) << "," << fmt_double(r.q_hat) << ","
           << fmt_double(r.coverage) << "," << fmt_double(r.mean_set_size) << "\n";
    }
}

/// Component-reliability histogram per epoch and modality (ten bins on [0,1]).
inline void write_reliability_hist_csv(const std::vector<EpochReport>& reports,
                                       const std::string& path) {
    std::ofstream os = open_out(path);
    os << "epoch,modality,bin_lo,bin_hi,count\n";
    for (const EpochReport& r : reports) {
        if (r.phase != "train") continue;
        for (std::size_t m = 0; m < r.rel_hist.size(); ++m) {
            for (std::size_t b = 0; b < r.rel_hist[m].size(); ++b) {
                os << r.epoch << "," << m << "," << fmt_double(0.1 * static_cast<double>(b))
                   << "," << fmt_double(0.1 * static_cast<double>(b + 1)) << ","
                   << r.rel_hist[m][b] << "\n";
            }
        }
    }
}

/// GSC statistics per epoch and modality.
inline void write_gsc_csv(const std::vector<EpochReport>& reports, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "epoch,modality,mean_rho,mean_w,weighted_var,unweighted_var\n";
    for (const EpochReport& r : reports) {
        if (r.phase != "train") continue;
        for (std::size_t m = 0; m < r.rho_train.size(); ++m) {
            os << r.epoch << "," << m << "," << fmt_double(r.rho_train[m]) << ","
               << fmt_double(r.w_mean[m]) << "," << fmt_double(r.weighted_var[m]) << ","
               << fmt_double(r.unweighted_var[m]) << "\n";
        }
    }
}

} // namespace cpsc
