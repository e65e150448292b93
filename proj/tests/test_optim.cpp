#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "cpsc/optim.hpp"

using namespace cpsc;

TEST_CASE("sgd single step") {
    ParamBlock p(1, 1);
    p.value.data[0] = 1.0;
    p.grad.data[0] = 2.0;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Sgd;
    cfg.learning_rate = 0.1;
    step({&p}, cfg);
    REQUIRE(p.value.data[0] == Catch::Approx(0.8).epsilon(1e-15));
    REQUIRE(p.grad.data[0] == 2.0); // caller zeroes
}

TEST_CASE("zero gradient leaves parameters bit-identical") {
    for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::AdaGrad}) {
        ParamBlock p(2, 3);
        for (std::size_t i = 0; i < p.value.size(); ++i)
            p.value.data[i] = 0.1 * static_cast<double>(i) - 0.25;
        const std::vector<double> before = p.value.data;
        OptimizerConfig cfg;
        cfg.kind = kind;
        cfg.learning_rate = 0.05;
        step({&p}, cfg);
        REQUIRE(p.value.data == before);
    }
}

TEST_CASE("adam first step matches the bias-corrected recurrence") {
    // t=1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps)
    ParamBlock p(1, 1);
    p.value.data[0] = 0.5;
    p.grad.data[0] = 3.0;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Adam;
    cfg.learning_rate = 0.01;
    step({&p}, cfg);
    const double expect = 0.5 - 0.01 * 3.0 / (3.0 + 1e-8);
    REQUIRE(p.value.data[0] == Catch::Approx(expect).epsilon(1e-14));
}

TEST_CASE("adagrad accumulates squared gradients") {
    ParamBlock p(1, 1);
    p.value.data[0] = 1.0;
    p.grad.data[0] = 2.0;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::AdaGrad;
    cfg.learning_rate = 0.1;
    step({&p}, cfg);
    const double after_one = 1.0 - 0.1 * 2.0 / (2.0 + 1e-10);
    REQUIRE(p.value.data[0] == Catch::Approx(after_one).epsilon(1e-12));
    // same gradient again: accumulator is now 8, denominator sqrt(8)
    step({&p}, cfg);
    const double after_two = after_one - 0.1 * 2.0 / (std::sqrt(8.0) + 1e-10);
    REQUIRE(p.value.data[0] == Catch::Approx(after_two).epsilon(1e-12));
}

TEST_CASE("sgd momentum accumulates velocity") {
    ParamBlock p(1, 1);
    p.value.data[0] = 0.0;
    p.grad.data[0] = 1.0;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Sgd;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    step({&p}, cfg); // v=1, x=-0.1
    step({&p}, cfg); // v=1.9, x=-0.29
    REQUIRE(p.value.data[0] == Catch::Approx(-0.29).epsilon(1e-12));
}

TEST_CASE("nan gradient aborts the whole step") {
    ParamBlock a(1, 1), b(1, 1);
    a.value.data[0] = 1.0;
    a.grad.data[0] = 1.0;
    b.value.data[0] = 2.0;
    b.grad.data[0] = std::numeric_limits<double>::quiet_NaN();
    OptimizerConfig cfg;
    REQUIRE_THROWS_AS(step({&a, &b}, cfg), NumericError);
    // no partial updates: the healthy block is untouched too
    REQUIRE(a.value.data[0] == 1.0);
    REQUIRE(b.value.data[0] == 2.0);
}

TEST_CASE("configuration validation") {
    ParamBlock p(1, 1);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.0;
    REQUIRE_THROWS_AS(step({&p}, cfg), ConfigError);
    cfg.learning_rate = -0.1;
    REQUIRE_THROWS_AS(step({&p}, cfg), ConfigError);
}
