#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cpsc/errors.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

/// Nonconformity of a (probability vector, label) pair: 1 - probs[label].
inline double nonconformity(const FeatureVector& probs, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
        throw IndexError("nonconformity: label out of range");
    return 1.0 - probs[static_cast<std::size_t>(label)];
}

/// Finite-sample conformal quantile: the ceil((n+1)(1-alpha))-th smallest
/// calibration score. When that rank exceeds n (tiny calibration sets) the
/// quantile saturates at 1 so coverage is trivially guaranteed. The quantile
/// is an order statistic, never interpolated.
inline double calibrate(std::vector<double> scores, double alpha) {
    if (scores.empty()) throw CalibrationError("calibrate: empty score list");
    if (!(alpha > 0.0 && alpha < 1.0)) throw CalibrationError("calibrate: alpha must be in (0,1)");
    const std::size_t n = scores.size();
    const double raw = static_cast<double>(n + 1) * (1.0 - alpha);
    const std::size_t rank = static_cast<std::size_t>(std::ceil(raw));
    if (rank > n) return 1.0;
    std::sort(scores.begin(), scores.end());
    return scores[rank - 1];
}

/// Split-conformal calibration state. Immutable once built; the trainer
/// replaces it wholesale on refresh and bumps the version counter.
struct ConformalState {
    double alpha = 0.1;
    std::vector<double> cal_scores;
    double q_hat = 1.0;
    std::uint64_t version = 0;
    bool calibrated = false;

    static ConformalState from_scores(std::vector<double> scores, double alpha,
                                      std::uint64_t version = 1) {
        ConformalState st;
        st.alpha = alpha;
        st.q_hat = calibrate(scores, alpha);
        st.cal_scores = std::move(scores);
        st.version = version;
        st.calibrated = true;
        return st;
    }

    void require_calibrated() const {
        if (!calibrated || cal_scores.empty())
            throw CalibrationError("conformal state queried before calibration");
    }
};

struct PredictionSet {
    struct Member {
        int cls;
        double score;
    };
    std::vector<Member> members; // ascending by (score, class index)
    double q_used = 1.0;

    std::size_t size() const { return members.size(); }

    // 1-based rank of cls in the ascending ordering, 0 if absent.
    int rank_of(int cls) const {
        for (std::size_t i = 0; i < members.size(); ++i)
            if (members[i].cls == cls) return static_cast<int>(i) + 1;
        return 0;
    }
    bool contains(int cls) const { return rank_of(cls) != 0; }
};

/// All classes whose nonconformity is <= q_hat, sorted ascending by score
/// with ties broken by class index. May be empty.
inline PredictionSet prediction_set(const FeatureVector& probs, double q_hat) {
    PredictionSet set;
    set.q_used = q_hat;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        const double s = 1.0 - probs[y];
        if (s <= q_hat) set.members.push_back({static_cast<int>(y), s});
    }
    std::sort(set.members.begin(), set.members.end(),
              [](const PredictionSet::Member& a, const PredictionSet::Member& b) {
                  if (a.score != b.score) return a.score < b.score;
                  return a.cls < b.cls;
              });
    return set;
}

/// Rank-based reliability of `target` under the prediction set at q_hat:
/// 1 - rank/|C| with rank the 1-based position in the ascending-score
/// ordering, and 0 when the target falls outside the set. Computed without
/// materializing the set; ties follow the same class-index rule.
inline double rank_reliability(const FeatureVector& probs, double q_hat, int target) {
    if (target < 0 || static_cast<std::size_t>(target) >= probs.size())
        throw IndexError("rank_reliability: target out of range");
    const double target_score = 1.0 - probs[static_cast<std::size_t>(target)];
    if (target_score > q_hat) return 0.0;
    std::size_t set_size = 0;
    std::size_t rank = 1;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        const double s = 1.0 - probs[y];
        if (s > q_hat) continue;
        ++set_size;
        if (s < target_score || (s == target_score && static_cast<int>(y) < target)) ++rank;
    }
    return 1.0 - static_cast<double>(rank) / static_cast<double>(set_size);
}

struct CoverageStats {
    double coverage = 0.0;
    double mean_set_size = 0.0;
};

/// Fraction of samples whose true label lies in its prediction set, plus the
/// average set size.
inline CoverageStats coverage_audit(const std::vector<FeatureVector>& prob_rows,
                                    const std::vector<int>& labels, double q_hat) {
    if (prob_rows.size() != labels.size())
        throw DimensionError("coverage_audit: probs/labels count mismatch");
    if (prob_rows.empty()) throw DimensionError("coverage_audit: empty input");
    std::size_t covered = 0;
    std::size_t total_size = 0;
    for (std::size_t i = 0; i < prob_rows.size(); ++i) {
        const FeatureVector& probs = prob_rows[i];
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.size())
            throw IndexError("coverage_audit: label out of range");
        std::size_t sz = 0;
        bool in = false;
        for (std::size_t c = 0; c < probs.size(); ++c) {
            if (1.0 - probs[c] <= q_hat) {
                ++sz;
                if (static_cast<int>(c) == y) in = true;
            }
        }
        total_size += sz;
        if (in) ++covered;
    }
    CoverageStats out;
    out.coverage = static_cast<double>(covered) / static_cast<double>(prob_rows.size());
    out.mean_set_size = static_cast<double>(total_size) / static_cast<double>(prob_rows.size());
    return out;
}

} // namespace cpsc
