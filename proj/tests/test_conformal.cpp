#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "cpsc/conformal.hpp"
#include "cpsc/rng.hpp"

using namespace cpsc;

namespace {

// Independent reference for rank_reliability: materialize the set, sort it,
// locate the label.
double brute_force_reliability(const FeatureVector& probs, double q_hat, int target) {
    struct Entry {
        double score;
        int cls;
    };
    std::vector<Entry> set;
    for (std::size_t y = 0; y < probs.size(); ++y) {
        const double s = 1.0 - probs[y];
        if (s <= q_hat) set.push_back({s, static_cast<int>(y)});
    }
    std::sort(set.begin(), set.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.cls < b.cls;
    });
    for (std::size_t r = 0; r < set.size(); ++r)
        if (set[r].cls == target)
            return 1.0 - static_cast<double>(r + 1) / static_cast<double>(set.size());
    return 0.0;
}

FeatureVector random_probs(CounterRng& rng, std::size_t n) {
    FeatureVector v(n);
    double z = 0.0;
    for (double& x : v) {
        x = -std::log(1.0 - rng.next_double() + 1e-300);
        z += x;
    }
    for (double& x : v) x /= z;
    return v;
}

} // namespace

TEST_CASE("nonconformity") {
    REQUIRE(nonconformity({0.7, 0.2, 0.1}, 0) == Catch::Approx(0.3).epsilon(1e-12));
    REQUIRE(nonconformity({0.0, 1.0}, 1) == 0.0);
    REQUIRE(nonconformity({0.25, 0.25, 0.25, 0.25}, 3) == Catch::Approx(0.75).epsilon(1e-12));
    REQUIRE_THROWS_AS(nonconformity({0.5, 0.5}, 2), IndexError);
}

TEST_CASE("calibrate follows the ceil((n+1)(1-alpha)) rank rule") {
    SECTION("hand-evaluated ranks") {
        REQUIRE(calibrate({0.1, 0.2, 0.3, 0.4}, 0.2) == 0.4); // rank ceil(5*0.8)=4
        REQUIRE(calibrate({0.5}, 0.5) == 0.5);                // rank ceil(2*0.5)=1
    }
    SECTION("degenerate equal scores") {
        REQUIRE(calibrate({0.3, 0.3, 0.3}, 0.25) == 0.3);
    }
    SECTION("rank beyond n saturates at 1") {
        REQUIRE(calibrate({0.4}, 0.1) == 1.0); // ceil(2*0.9)=2 > n=1
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(calibrate({}, 0.1), CalibrationError);
        REQUIRE_THROWS_AS(calibrate({0.5}, 0.0), CalibrationError);
        REQUIRE_THROWS_AS(calibrate({0.5}, 1.0), CalibrationError);
    }
    SECTION("permutation-invariant") {
        CounterRng rng(rng_key(3, "perm"));
        std::vector<double> scores;
        for (int i = 0; i < 17; ++i) scores.push_back(rng.next_double());
        const double q = calibrate(scores, 0.13);
        for (int trial = 0; trial < 10; ++trial) {
            rng.shuffle(scores);
            REQUIRE(calibrate(scores, 0.13) == q);
        }
    }
    SECTION("q_hat non-decreasing in 1 - alpha") {
        CounterRng rng(rng_key(4, "mono"));
        std::vector<double> scores;
        for (int i = 0; i < 31; ++i) scores.push_back(rng.next_double());
        double prev = 0.0;
        for (double alpha : {0.5, 0.4, 0.3, 0.2, 0.1, 0.05}) {
            const double q = calibrate(scores, alpha);
            REQUIRE(q >= prev);
            prev = q;
        }
    }
}

TEST_CASE("prediction sets") {
    SECTION("hand case") {
        PredictionSet set = prediction_set({0.7, 0.2, 0.1}, 0.5);
        REQUIRE(set.size() == 1);
        REQUIRE(set.members[0].cls == 0);
        REQUIRE(set.members[0].score == Catch::Approx(0.3).epsilon(1e-12));
    }
    SECTION("q=1 includes everything, q=0 nothing") {
        REQUIRE(prediction_set({0.5, 0.3, 0.2}, 1.0).size() == 3);
        REQUIRE(prediction_set({0.5, 0.3, 0.2}, 0.0).size() == 0);
    }
    SECTION("ascending order with class-index ties") {
        PredictionSet set = prediction_set({0.25, 0.25, 0.25, 0.25}, 1.0);
        for (std::size_t i = 0; i < set.size(); ++i)
            REQUIRE(set.members[i].cls == static_cast<int>(i));
    }
    SECTION("nested in q") {
        CounterRng rng(rng_key(5, "nest"));
        for (int trial = 0; trial < 50; ++trial) {
            FeatureVector probs = random_probs(rng, 6);
            const double q1 = rng.next_double();
            const double q2 = q1 + (1.0 - q1) * rng.next_double();
            PredictionSet s1 = prediction_set(probs, q1);
            PredictionSet s2 = prediction_set(probs, q2);
            for (const auto& member : s1.members) REQUIRE(s2.contains(member.cls));
        }
    }
}

TEST_CASE("rank reliability") {
    SECTION("rank 1 of 3") {
        // scores: 0.3, 0.55, 0.85; q=0.9 keeps all three
        REQUIRE(rank_reliability({0.7, 0.45, 0.15}, 0.9, 0) ==
                Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SECTION("target outside the set") {
        REQUIRE(rank_reliability({0.7, 0.2, 0.1}, 0.5, 1) == 0.0);
    }
    SECTION("target ranked last") {
        REQUIRE(rank_reliability({0.7, 0.2, 0.1}, 1.0, 2) == 0.0);
    }
    SECTION("uniform probabilities break ties by class index") {
        // all scores equal, set = all classes, rank = class index + 1
        const double r0 = rank_reliability({0.25, 0.25, 0.25, 0.25}, 1.0, 0);
        const double r3 = rank_reliability({0.25, 0.25, 0.25, 0.25}, 1.0, 3);
        REQUIRE(r0 == Catch::Approx(0.75).epsilon(1e-12));
        REQUIRE(r3 == 0.0);
    }
    SECTION("matches the brute-force reference") {
        CounterRng rng(rng_key(6, "rel"));
        for (int trial = 0; trial < 2000; ++trial) {
            const std::size_t k = 2 + static_cast<std::size_t>(rng.next_int(8));
            FeatureVector probs = random_probs(rng, k);
            const double q = rng.next_double();
            const int target = rng.next_int(static_cast<int>(k));
            REQUIRE(rank_reliability(probs, q, target) ==
                    brute_force_reliability(probs, q, target));
        }
    }
    SECTION("invariant to classes outside the set") {
        // class 2 sits above q and must not affect the target's rank
        const double with = rank_reliability({0.5, 0.4, 0.1}, 0.62, 0);
        const double without = rank_reliability({0.5, 0.45, 0.05}, 0.62, 0);
        REQUIRE(with == without);
    }
}

TEST_CASE("coverage audit") {
    SECTION("full and empty sets") {
        std::vector<FeatureVector> rows = {{0.6, 0.3, 0.1}, {0.1, 0.8, 0.1}};
        std::vector<int> labels = {0, 1};
        CoverageStats full = coverage_audit(rows, labels, 1.0);
        REQUIRE(full.coverage == 1.0);
        REQUIRE(full.mean_set_size == 3.0);
        CoverageStats empty = coverage_audit(rows, labels, 0.0);
        REQUIRE(empty.coverage == 0.0);
        REQUIRE(empty.mean_set_size == 0.0);
    }
    SECTION("count mismatch") {
        REQUIRE_THROWS_AS(coverage_audit({{0.5, 0.5}}, {0, 1}, 0.5), DimensionError);
    }
    SECTION("split-conformal coverage on simulated exchangeable scores") {
        // scores ~ U(0,1) stand in for a frozen model on i.i.d. data
        int pass = 0;
        const int reps = 10;
        for (int rep = 0; rep < reps; ++rep) {
            CounterRng rng(rng_key(100 + rep, "simcov"));
            std::vector<double> cal(200);
            for (double& s : cal) s = rng.next_double();
            const double q = calibrate(cal, 0.1);
            int covered = 0;
            const int n_test = 500;
            for (int i = 0; i < n_test; ++i)
                if (rng.next_double() <= q) ++covered;
            const double coverage = static_cast<double>(covered) / n_test;
            if (coverage >= 0.9 - 3.0 * std::sqrt(0.09 / n_test) - 0.02) ++pass;
        }
        REQUIRE(pass >= 9);
    }
}

TEST_CASE("conformal state bookkeeping") {
    ConformalState st;
    REQUIRE_THROWS_AS(st.require_calibrated(), CalibrationError);
    st = ConformalState::from_scores({0.1, 0.4, 0.2}, 0.3, 7);
    REQUIRE(st.calibrated);
    REQUIRE(st.version == 7);
    REQUIRE(st.q_hat == calibrate({0.1, 0.4, 0.2}, 0.3));
    REQUIRE_NOTHROW(st.require_calibrated());
}
