#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpsc/errors.hpp"
#include "cpsc/optim.hpp"
#include "cpsc/rng.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

struct ModelConfig {
    int modality_count = 2;
    std::vector<int> input_dims;  // per modality
    std::vector<int> hidden_dims; // per modality encoder hidden width
    int feature_dim = 16;         // d
    int component_count = 4;      // n
    int top_k = 2;                // K_sel
    int class_count = 4;          // K_cls

    int decomposition_dim() const { return component_count * feature_dim; }

    void validate() const {
        if (modality_count < 2) throw ConfigError("model: modality_count must be >= 2");
        if (static_cast<int>(input_dims.size()) != modality_count)
            throw ConfigError("model: input_dims must list one dim per modality");
        if (static_cast<int>(hidden_dims.size()) != modality_count)
            throw ConfigError("model: hidden_dims must list one width per modality");
        for (int d : input_dims)
            if (d < 1) throw ConfigError("model: input dims must be >= 1");
        for (int h : hidden_dims)
            if (h < 1) throw ConfigError("model: hidden widths must be >= 1");
        if (feature_dim < 1) throw ConfigError("model: feature_dim must be >= 1");
        if (component_count < 2) throw ConfigError("model: component_count must be >= 2");
        if (top_k < 1 || top_k > component_count)
            throw ConfigError("model: top_k must satisfy 1 <= top_k <= component_count");
        if (class_count < 2) throw ConfigError("model: class_count must be >= 2");
    }
};

struct EncoderParams {
    ParamBlock w1, b1; // input -> hidden
    ParamBlock w2, b2; // hidden -> feature
};

/// The multimodal network: per-modality two-layer MLP encoders, bias-free
/// decomposition projections, per-modality unimodal heads and one fusion
/// head over the concatenated per-modality features.
struct CpscModel {
    ModelConfig config;
    std::vector<EncoderParams> encoders;
    std::vector<ParamBlock> decomp; // W_dec^m, (n*d) x d, no bias
    std::vector<ParamBlock> uni_w;  // K_cls x d
    std::vector<ParamBlock> uni_b;  // K_cls x 1
    ParamBlock fuse_w;              // K_cls x (M*d)
    ParamBlock fuse_b;              // K_cls x 1

    static CpscModel init(const ModelConfig& cfg, std::uint64_t seed) {
        cfg.validate();
        CpscModel model;
        model.config = cfg;
        const int d = cfg.feature_dim;
        const int l = cfg.decomposition_dim();
        const int k = cfg.class_count;
        std::uint64_t block = 0;
        auto gaussian_block = [&](std::size_t rows, std::size_t cols, double scale) {
            ParamBlock p(rows, cols);
            CounterRng rng(rng_key(seed, "init", block++));
            for (double& v : p.value.data) v = scale * rng.next_gaussian();
            return p;
        };
        for (int m = 0; m < cfg.modality_count; ++m) {
            const int din = cfg.input_dims[m];
            const int h = cfg.hidden_dims[m];
            EncoderParams enc;
            enc.w1 = gaussian_block(h, din, std::sqrt(2.0 / din));
            // small nonzero bias init keeps encoder outputs off the exact
            // ReLU kink of the decomposition layer even when a sample's
            // hidden layer goes fully dead
            enc.b1 = gaussian_block(h, 1, 0.01);
            enc.w2 = gaussian_block(d, h, std::sqrt(1.0 / h));
            enc.b2 = gaussian_block(d, 1, 0.01);
            model.encoders.push_back(std::move(enc));
            // decomposition starts as n jittered copies of the input feature,
            // so the component average stays close to h and the raw-feature
            // inference path remains aligned with the calibrated training path
            ParamBlock dec = gaussian_block(l, d, 0.2 * std::sqrt(2.0 / d));
            for (int k = 0; k < cfg.component_count; ++k)
                for (int i = 0; i < d; ++i)
                    dec.value(static_cast<std::size_t>(k * d + i), static_cast<std::size_t>(i)) += 1.0;
            model.decomp.push_back(std::move(dec));
            model.uni_w.push_back(gaussian_block(k, d, std::sqrt(1.0 / d)));
            model.uni_b.push_back(ParamBlock(k, 1));
        }
        model.fuse_w = gaussian_block(k, static_cast<std::size_t>(cfg.modality_count) * d,
                                      std::sqrt(1.0 / (cfg.modality_count * d)));
        model.fuse_b = ParamBlock(k, 1);
        return model;
    }

    std::vector<ParamBlock*> param_blocks() {
        std::vector<ParamBlock*> out;
        for (int m = 0; m < config.modality_count; ++m) {
            out.push_back(&encoders[m].w1);
            out.push_back(&encoders[m].b1);
            out.push_back(&encoders[m].w2);
            out.push_back(&encoders[m].b2);
            out.push_back(&decomp[m]);
            out.push_back(&uni_w[m]);
            out.push_back(&uni_b[m]);
        }
        out.push_back(&fuse_w);
        out.push_back(&fuse_b);
        return out;
    }

    std::vector<const ParamBlock*> param_blocks() const {
        std::vector<const ParamBlock*> out;
        for (const ParamBlock* p : const_cast<CpscModel*>(this)->param_blocks()) out.push_back(p);
        return out;
    }

    std::vector<std::string> param_names() const {
        std::vector<std::string> out;
        for (int m = 0; m < config.modality_count; ++m) {
            const std::string p = "m" + std::to_string(m) + ".";
            out.push_back(p + "enc.w1");
            out.push_back(p + "enc.b1");
            out.push_back(p + "enc.w2");
            out.push_back(p + "enc.b2");
            out.push_back(p + "decomp");
            out.push_back(p + "uni.w");
            out.push_back(p + "uni.b");
        }
        out.push_back("fuse.w");
        out.push_back("fuse.b");
        return out;
    }

    void zero_grads() {
        for (ParamBlock* p : param_blocks()) p->zero_grad();
    }
};

// ---------------------------------------------------------------------------
// Forward caches. Everything the backward pass needs is recorded per sample.
// ---------------------------------------------------------------------------

struct ModalityCache {
    FeatureVector x;
    FeatureVector a1, z1; // hidden pre/post ReLU
    FeatureVector h;      // encoder output

    // Calibrated path only:
    FeatureVector u, g;                  // decomposition pre/post ReLU
    std::vector<FeatureVector> comps;    // n components of dim d
    std::vector<double> reliability;     // r^m_k
    std::vector<double> label_scores;    // 1 - p_k[target] per component
    std::vector<int> selected;           // ascending indices
    FeatureVector h_tilde;
    FeatureVector uni_logits, uni_probs; // head on h_tilde
};

struct SampleCache {
    std::vector<ModalityCache> mods;
    bool calibrated_path = false;
    FeatureVector fused_input;
    FeatureVector fused_logits, fused_probs;
    int label = -1;
};

// ---------------------------------------------------------------------------
// Forward pieces
// ---------------------------------------------------------------------------

inline void encode_cached(const CpscModel& model, int m, const FeatureVector& x,
                          ModalityCache& cache) {
    const EncoderParams& enc = model.encoders[m];
    if (x.size() != static_cast<std::size_t>(model.config.input_dims[m]))
        throw DimensionError("encode: input dim mismatch for modality " + std::to_string(m));
    cache.x = x;
    cache.a1 = matvec(enc.w1.value, x);
    for (std::size_t i = 0; i < cache.a1.size(); ++i) cache.a1[i] += enc.b1.value.data[i];
    cache.z1 = relu(cache.a1);
    cache.h = matvec(enc.w2.value, cache.z1);
    for (std::size_t i = 0; i < cache.h.size(); ++i) cache.h[i] += enc.b2.value.data[i];
}

/// Deterministic encoder forward for modality m.
inline FeatureVector encode(const CpscModel& model, int m, const FeatureVector& x) {
    ModalityCache cache;
    encode_cached(model, m, x, cache);
    return cache.h;
}

inline void decompose_cached(const CpscModel& model, int m, ModalityCache& cache) {
    const int n = model.config.component_count;
    const int d = model.config.feature_dim;
    cache.u = matvec(model.decomp[m].value, cache.h);
    cache.g = relu(cache.u);
    cache.comps.assign(static_cast<std::size_t>(n), FeatureVector());
    for (int k = 0; k < n; ++k)
        cache.comps[k].assign(cache.g.begin() + static_cast<std::ptrdiff_t>(k) * d,
                              cache.g.begin() + static_cast<std::ptrdiff_t>(k + 1) * d);
}

/// Projects h into n*d dims with a bias-free layer, applies ReLU and splits
/// the result into n contiguous d-dim components.
inline std::vector<FeatureVector> decompose(const CpscModel& model, int m,
                                            const FeatureVector& h) {
    if (h.size() != static_cast<std::size_t>(model.config.feature_dim))
        throw DimensionError("decompose: feature dim mismatch");
    ModalityCache cache;
    cache.h = h;
    decompose_cached(model, m, cache);
    return cache.comps;
}

inline FeatureVector unimodal_logits(const CpscModel& model, int m, const FeatureVector& v) {
    if (v.size() != static_cast<std::size_t>(model.config.feature_dim))
        throw DimensionError("unimodal head: feature dim mismatch");
    FeatureVector logits = matvec(model.uni_w[m].value, v);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += model.uni_b[m].value.data[i];
    return logits;
}

/// Class probabilities from modality m's head applied to a d-dim feature.
inline FeatureVector unimodal_predict(const CpscModel& model, int m, const FeatureVector& v) {
    return softmax(unimodal_logits(model, m, v));
}

/// Class probabilities from the fusion head over per-modality features,
/// concatenated in modality order.
inline FeatureVector fuse_predict(const CpscModel& model,
                                  const std::vector<FeatureVector>& feats) {
    if (static_cast<int>(feats.size()) != model.config.modality_count)
        throw DimensionError("fuse_predict: expected one feature vector per modality");
    FeatureVector input;
    input.reserve(static_cast<std::size_t>(model.config.modality_count) *
                  model.config.feature_dim);
    for (const FeatureVector& f : feats) {
        if (f.size() != static_cast<std::size_t>(model.config.feature_dim))
            throw DimensionError("fuse_predict: feature dim mismatch");
        input.insert(input.end(), f.begin(), f.end());
    }
    FeatureVector logits = matvec(model.fuse_w.value, input);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += model.fuse_b.value.data[i];
    return softmax(logits);
}

inline void fuse_cached(const CpscModel& model, SampleCache& cache, bool calibrated) {
    cache.calibrated_path = calibrated;
    cache.fused_input.clear();
    for (const ModalityCache& mc : cache.mods) {
        const FeatureVector& f = calibrated ? mc.h_tilde : mc.h;
        cache.fused_input.insert(cache.fused_input.end(), f.begin(), f.end());
    }
    cache.fused_logits = matvec(model.fuse_w.value, cache.fused_input);
    for (std::size_t i = 0; i < cache.fused_logits.size(); ++i)
        cache.fused_logits[i] += model.fuse_b.value.data[i];
    cache.fused_probs = softmax(cache.fused_logits);
}

/// Encoder-only forward of every modality (the representation stage shared by
/// both the raw and the calibrated path).
inline SampleCache forward_repr(const CpscModel& model, const std::vector<FeatureVector>& inputs,
                                int label) {
    if (static_cast<int>(inputs.size()) != model.config.modality_count)
        throw DimensionError("forward: expected one input per modality");
    SampleCache cache;
    cache.label = label;
    cache.mods.resize(inputs.size());
    for (int m = 0; m < model.config.modality_count; ++m)
        encode_cached(model, m, inputs[m], cache.mods[m]);
    return cache;
}

/// Raw path: fusion consumes the encoder outputs directly (warm-up training
/// and the default inference path).
inline SampleCache forward_raw(const CpscModel& model, const std::vector<FeatureVector>& inputs,
                               int label) {
    SampleCache cache = forward_repr(model, inputs, label);
    fuse_cached(model, cache, /*calibrated=*/false);
    return cache;
}

/// Completes the calibrated path once a component selection is fixed for each
/// modality: averages the selected components, runs the unimodal heads on the
/// averages and fuses them. Selections must be sorted ascending.
inline void finish_calibrated(const CpscModel& model, SampleCache& cache,
                              const std::vector<std::vector<int>>& selection) {
    const int d = model.config.feature_dim;
    for (int m = 0; m < model.config.modality_count; ++m) {
        ModalityCache& mc = cache.mods[m];
        if (mc.comps.empty()) decompose_cached(model, m, mc);
        const std::vector<int>& sel = selection[m];
        if (sel.empty()) throw ConfigError("finish_calibrated: empty selection");
        mc.selected = sel;
        mc.h_tilde.assign(static_cast<std::size_t>(d), 0.0);
        for (int k : sel) axpy(1.0, mc.comps[static_cast<std::size_t>(k)], mc.h_tilde);
        const double inv = 1.0 / static_cast<double>(sel.size());
        for (double& v : mc.h_tilde) v *= inv;
        mc.uni_logits = unimodal_logits(model, m, mc.h_tilde);
        mc.uni_probs = softmax(mc.uni_logits);
    }
    fuse_cached(model, cache, /*calibrated=*/true);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

/// Independent scale factors for the loss heads attached to one sample.
/// fused/unimodal scales multiply the softmax-cross-entropy logit gradient
/// (probs - onehot(label)); GSC weights enter through `unimodal`.
struct HeadSeeds {
    double fused = 0.0;
    std::vector<double> unimodal; // per modality; empty means all zero
};

/// Gradients injected from losses computed outside the model (the diversity
/// loss). dh[m] adds to the encoder-output gradient, dc[m][k] to component
/// gradients; empty vectors mean zero.
struct ExtraGrads {
    std::vector<FeatureVector> dh;
    std::vector<std::vector<FeatureVector>> dc;
};

/// Accumulates (+=) gradients for one cached sample into the model's
/// ParamBlocks. Supports both paths; component selection is taken from the
/// cache and treated as a constant, so gradient flows only through the
/// average of the selected components with coefficient 1/K each.
inline void backward_sample(CpscModel& model, const SampleCache& cache, const HeadSeeds& seeds,
                            const ExtraGrads* extra = nullptr) {
    const ModelConfig& cfg = model.config;
    const int d = cfg.feature_dim;
    if (cache.label < 0 || cache.label >= cfg.class_count)
        throw IndexError("backward: invalid cached label");
    if (cache.fused_probs.empty())
        throw ConfigError("backward: stale cache (no fused forward recorded)");

    // Fusion head.
    std::vector<FeatureVector> d_feat(static_cast<std::size_t>(cfg.modality_count),
                                      FeatureVector(static_cast<std::size_t>(d), 0.0));
    if (seeds.fused != 0.0) {
        FeatureVector dlog(cache.fused_probs);
        dlog[static_cast<std::size_t>(cache.label)] -= 1.0;
        for (double& v : dlog) v *= seeds.fused;
        add_outer(model.fuse_w.grad, dlog, cache.fused_input);
        for (std::size_t i = 0; i < dlog.size(); ++i) model.fuse_b.grad.data[i] += dlog[i];
        FeatureVector dinput = matvec_t(model.fuse_w.value, dlog);
        for (int m = 0; m < cfg.modality_count; ++m)
            for (int i = 0; i < d; ++i)
                d_feat[m][static_cast<std::size_t>(i)] = dinput[static_cast<std::size_t>(m * d + i)];
    }

    for (int m = 0; m < cfg.modality_count; ++m) {
        const ModalityCache& mc = cache.mods[m];
        FeatureVector dh(static_cast<std::size_t>(d), 0.0);

        if (cache.calibrated_path) {
            FeatureVector dht = d_feat[m];
            const double uni_scale =
                seeds.unimodal.empty() ? 0.0 : seeds.unimodal[static_cast<std::size_t>(m)];
            if (uni_scale != 0.0) {
                FeatureVector dlog(mc.uni_probs);
                dlog[static_cast<std::size_t>(cache.label)] -= 1.0;
                for (double& v : dlog) v *= uni_scale;
                add_outer(model.uni_w[m].grad, dlog, mc.h_tilde);
                for (std::size_t i = 0; i < dlog.size(); ++i)
                    model.uni_b[m].grad.data[i] += dlog[i];
                axpy(1.0, matvec_t(model.uni_w[m].value, dlog), dht);
            }

            // Through the top-K average into the selected components, plus any
            // externally computed component gradients, then through the
            // decomposition ReLU and projection.
            const double inv_k = 1.0 / static_cast<double>(mc.selected.size());
            FeatureVector dg(mc.g.size(), 0.0);
            for (int k : mc.selected)
                for (int i = 0; i < d; ++i)
                    dg[static_cast<std::size_t>(k * d + i)] += inv_k * dht[static_cast<std::size_t>(i)];
            if (extra != nullptr && !extra->dc.empty() && !extra->dc[m].empty()) {
                for (int k = 0; k < cfg.component_count; ++k) {
                    const FeatureVector& dck = extra->dc[m][static_cast<std::size_t>(k)];
                    if (dck.empty()) continue;
                    for (int i = 0; i < d; ++i)
                        dg[static_cast<std::size_t>(k * d + i)] += dck[static_cast<std::size_t>(i)];
                }
            }
            FeatureVector du(mc.u.size(), 0.0);
            for (std::size_t i = 0; i < du.size(); ++i)
                du[i] = mc.u[i] > 0.0 ? dg[i] : 0.0;
            add_outer(model.decomp[m].grad, du, mc.h);
            dh = matvec_t(model.decomp[m].value, du);
        } else {
            dh = d_feat[m];
        }

        if (extra != nullptr && !extra->dh.empty() && !extra->dh[m].empty())
            axpy(1.0, extra->dh[m], dh);

        // Encoder.
        EncoderParams& enc = model.encoders[m];
        add_outer(enc.w2.grad, dh, mc.z1);
        for (std::size_t i = 0; i < dh.size(); ++i) enc.b2.grad.data[i] += dh[i];
        FeatureVector dz1 = matvec_t(enc.w2.value, dh);
        FeatureVector da1(dz1.size(), 0.0);
        for (std::size_t i = 0; i < dz1.size(); ++i)
            da1[i] = mc.a1[i] > 0.0 ? dz1[i] : 0.0;
        add_outer(enc.w1.grad, da1, mc.x);
        for (std::size_t i = 0; i < da1.size(); ++i) enc.b1.grad.data[i] += da1[i];
    }
}

} // namespace cpsc
