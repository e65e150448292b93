#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cpsc/errors.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

/// One trainable tensor together with its gradient and optimizer slots.
/// The trainer is the single writer of both grad and the slot state.
struct ParamBlock {
    Tensor2D value;
    Tensor2D grad;
    Tensor2D slot_m; // SGD momentum / Adam first moment
    Tensor2D slot_v; // Adam second moment / AdaGrad accumulator
    std::int64_t steps = 0;

    ParamBlock() = default;
    explicit ParamBlock(Tensor2D v)
        : value(std::move(v)),
          grad(value.rows, value.cols, 0.0),
          slot_m(value.rows, value.cols, 0.0),
          slot_v(value.rows, value.cols, 0.0) {}
    ParamBlock(std::size_t rows, std::size_t cols) : ParamBlock(Tensor2D(rows, cols, 0.0)) {}

    void zero_grad() { grad.fill(0.0); }
    void reset_optimizer_state() {
        slot_m.fill(0.0);
        slot_v.fill(0.0);
        steps = 0;
    }
};

enum class OptimizerKind { Sgd, Adam, AdaGrad };

inline std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::Sgd: return "sgd";
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::AdaGrad: return "adagrad";
    }
    return "sgd";
}

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "adagrad") return OptimizerKind::AdaGrad;
    throw ConfigError("unknown optimizer kind: " + s);
}

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.1;
    double momentum = 0.0;      // SGD
    double beta1 = 0.9;         // Adam
    double beta2 = 0.999;       // Adam
    double eps_adam = 1e-8;     // Adam
    double eps_adagrad = 1e-10; // AdaGrad

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("optimizer learning rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("sgd momentum must be in [0,1)");
        if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
            throw ConfigError("adam betas must be in (0,1)");
    }
};

/// Applies one optimizer update to every block. Gradients are validated for
/// NaN/Inf across all blocks before any parameter is touched, so a numeric
/// failure aborts the step without partial updates. Gradients themselves are
/// left untouched; the caller zeroes them.
inline void step(const std::vector<ParamBlock*>& params, const OptimizerConfig& cfg) {
    cfg.validate();
    for (const ParamBlock* p : params) {
        if (!p->grad.all_finite()) throw NumericError("optimizer step: non-finite gradient");
        if (!p->grad.same_shape(p->value)) throw DimensionError("optimizer step: grad/value shape mismatch");
    }
    const double lr = cfg.learning_rate;
    for (ParamBlock* p : params) {
        p->steps += 1;
        const std::size_t n = p->value.size();
        switch (cfg.kind) {
            case OptimizerKind::Sgd: {
                if (cfg.momentum == 0.0) {
                    for (std::size_t i = 0; i < n; ++i) p->value.data[i] -= lr * p->grad.data[i];
                } else {
                    for (std::size_t i = 0; i < n; ++i) {
                        p->slot_m.data[i] = cfg.momentum * p->slot_m.data[i] + p->grad.data[i];
                        p->value.data[i] -= lr * p->slot_m.data[i];
                    }
                }
                break;
            }
            case OptimizerKind::Adam: {
                const double b1 = cfg.beta1, b2 = cfg.beta2;
                const double bc1 = 1.0 - std::pow(b1, static_cast<double>(p->steps));
                const double bc2 = 1.0 - std::pow(b2, static_cast<double>(p->steps));
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = p->grad.data[i];
                    p->slot_m.data[i] = b1 * p->slot_m.data[i] + (1.0 - b1) * g;
                    p->slot_v.data[i] = b2 * p->slot_v.data[i] + (1.0 - b2) * g * g;
                    const double mhat = p->slot_m.data[i] / bc1;
                    const double vhat = p->slot_v.data[i] / bc2;
                    p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps_adam);
                }
                break;
            }
            case OptimizerKind::AdaGrad: {
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = p->grad.data[i];
                    p->slot_v.data[i] += g * g;
                    p->value.data[i] -= lr * g / (std::sqrt(p->slot_v.data[i]) + cfg.eps_adagrad);
                }
                break;
            }
        }
    }
}

} // namespace cpsc
