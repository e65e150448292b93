#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpsc/errors.hpp"
#include "cpsc/model.hpp"
#include "cpsc/synth.hpp"
#include "cpsc/trainer.hpp"

namespace cpsc {

using Json = nlohmann::ordered_json;

/// Run configuration as stored on disk: a nested key/value document with
/// `model`, `train` and `data` sections. Parsing is strict; any key that the
/// schema does not know is an error naming the offending key.
struct RunConfig {
    // model (architecture; input dims and class count come from `data`)
    int feature_dim = 16;
    int component_count = 4;
    int top_k = 2;
    std::vector<int> hidden_dims = {32, 32};

    TrainConfig train;

    // data
    int class_count = 4;
    int pool_samples = 2500;  // train + calibration pool
    int test_samples = 1000;
    std::vector<ModalitySpec> modalities;
    CorruptionSpec corruption;
    bool data_seed_set = false;
    std::uint64_t data_seed = 0; // defaults to the run seed when unset

    ModelConfig resolved_model() const {
        ModelConfig mc;
        mc.modality_count = static_cast<int>(modalities.size());
        mc.input_dims.clear();
        for (const ModalitySpec& m : modalities) mc.input_dims.push_back(m.input_dim);
        mc.hidden_dims = hidden_dims;
        mc.feature_dim = feature_dim;
        mc.component_count = component_count;
        mc.top_k = top_k;
        mc.class_count = class_count;
        return mc;
    }

    std::uint64_t effective_data_seed() const { return data_seed_set ? data_seed : train.seed; }

    void validate() const {
        resolved_model().validate();
        train.validate();
        if (pool_samples < 2) throw ConfigError("data: samples must be >= 2");
        if (test_samples < 0) throw ConfigError("data: test_samples must be >= 0");
        corruption.validate(static_cast<int>(modalities.size()));
    }
};

namespace detail {

inline void require_keys(const Json& obj, const std::string& where,
                         const std::vector<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const std::string& k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("unknown config key: " + where + "." + item.key());
    }
}

template <typename T>
T get_or(const Json& obj, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config key has wrong type: " + key + " (" + e.what() + ")");
    }
}

} // namespace detail

inline RunConfig parse_run_config(const Json& root) {
    RunConfig cfg;
    detail::require_keys(root, "<root>", {"model", "train", "data"});

    if (root.contains("model")) {
        const Json& m = root.at("model");
        detail::require_keys(m, "model", {"feature_dim", "component_count", "top_k", "hidden_dims"});
        cfg.feature_dim = detail::get_or(m, "feature_dim", cfg.feature_dim);
        cfg.component_count = detail::get_or(m, "component_count", cfg.component_count);
        cfg.top_k = detail::get_or(m, "top_k", cfg.top_k);
        cfg.hidden_dims = detail::get_or(m, "hidden_dims", cfg.hidden_dims);
    }

    if (root.contains("train")) {
        const Json& t = root.at("train");
        detail::require_keys(t, "train",
                             {"warmup_epochs", "total_epochs", "batch_size", "alpha",
                              "cp_update_interval", "calibration_fraction", "lambda1", "lambda2",
                              "gsc_a", "gsc_b", "seed", "step_mode", "clip_norm", "optimizer"});
        TrainConfig& tc = cfg.train;
        tc.warmup_epochs = detail::get_or(t, "warmup_epochs", tc.warmup_epochs);
        tc.total_epochs = detail::get_or(t, "total_epochs", tc.total_epochs);
        tc.batch_size = detail::get_or(t, "batch_size", tc.batch_size);
        tc.alpha = detail::get_or(t, "alpha", tc.alpha);
        tc.cp_update_interval = detail::get_or(t, "cp_update_interval", tc.cp_update_interval);
        tc.calibration_fraction =
            detail::get_or(t, "calibration_fraction", tc.calibration_fraction);
        tc.lambda1 = detail::get_or(t, "lambda1", tc.lambda1);
        tc.lambda2 = detail::get_or(t, "lambda2", tc.lambda2);
        tc.gsc.a = detail::get_or(t, "gsc_a", tc.gsc.a);
        tc.gsc.b = detail::get_or(t, "gsc_b", tc.gsc.b);
        tc.seed = detail::get_or<std::uint64_t>(t, "seed", tc.seed);
        tc.step_mode = step_mode_from_string(
            detail::get_or<std::string>(t, "step_mode", to_string(tc.step_mode)));
        tc.clip_norm = detail::get_or(t, "clip_norm", tc.clip_norm);
        if (t.contains("optimizer")) {
            const Json& o = t.at("optimizer");
            detail::require_keys(o, "train.optimizer",
                                 {"kind", "learning_rate", "momentum", "beta1", "beta2",
                                  "eps_adam", "eps_adagrad"});
            OptimizerConfig& oc = tc.optimizer;
            oc.kind = optimizer_kind_from_string(
                detail::get_or<std::string>(o, "kind", to_string(oc.kind)));
            oc.learning_rate = detail::get_or(o, "learning_rate", oc.learning_rate);
            oc.momentum = detail::get_or(o, "momentum", oc.momentum);
            oc.beta1 = detail::get_or(o, "beta1", oc.beta1);
            oc.beta2 = detail::get_or(o, "beta2", oc.beta2);
            oc.eps_adam = detail::get_or(o, "eps_adam", oc.eps_adam);
            oc.eps_adagrad = detail::get_or(o, "eps_adagrad", oc.eps_adagrad);
        }
    }

    if (root.contains("data")) {
        const Json& d = root.at("data");
        detail::require_keys(d, "data",
                             {"class_count", "samples", "test_samples", "seed", "modalities",
                              "corruption"});
        cfg.class_count = detail::get_or(d, "class_count", cfg.class_count);
        cfg.pool_samples = detail::get_or(d, "samples", cfg.pool_samples);
        cfg.test_samples = detail::get_or(d, "test_samples", cfg.test_samples);
        if (d.contains("seed")) {
            cfg.data_seed_set = true;
            cfg.data_seed = detail::get_or<std::uint64_t>(d, "seed", 0);
        }
        if (d.contains("modalities")) {
            cfg.modalities.clear();
            for (const Json& mj : d.at("modalities")) {
                detail::require_keys(mj, "data.modalities[]",
                                     {"input_dim", "signal_strength", "noise_sigma"});
                ModalitySpec ms;
                ms.input_dim = detail::get_or(mj, "input_dim", ms.input_dim);
                ms.signal_strength = detail::get_or(mj, "signal_strength", ms.signal_strength);
                ms.noise_sigma = detail::get_or(mj, "noise_sigma", ms.noise_sigma);
                cfg.modalities.push_back(ms);
            }
        }
        if (d.contains("corruption")) {
            const Json& cj = d.at("corruption");
            detail::require_keys(cj, "data.corruption",
                                 {"kind", "epsilon", "target_modalities", "applied_at"});
            cfg.corruption.kind = corruption_kind_from_string(
                detail::get_or<std::string>(cj, "kind", to_string(cfg.corruption.kind)));
            cfg.corruption.epsilon = detail::get_or(cj, "epsilon", cfg.corruption.epsilon);
            cfg.corruption.target_modalities =
                detail::get_or(cj, "target_modalities", cfg.corruption.target_modalities);
            const std::string phase = detail::get_or<std::string>(
                cj, "applied_at",
                cfg.corruption.applied_at == CorruptionPhase::Train ? "train" : "test");
            if (phase == "train")
                cfg.corruption.applied_at = CorruptionPhase::Train;
            else if (phase == "test")
                cfg.corruption.applied_at = CorruptionPhase::Test;
            else
                throw ConfigError("data.corruption.applied_at must be train or test");
        }
    }

    if (cfg.modalities.empty()) {
        cfg.modalities = {ModalitySpec{20, 1.0, 0.3}, ModalitySpec{20, 1.0, 0.3}};
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    Json root;
    try {
        root = Json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse failure in " + path + ": " + e.what());
    }
    return parse_run_config(root);
}

/// Canonical echo of every config field; re-serializing a parsed config is
/// byte-stable, which the metric determinism contract relies on.
inline Json echo_run_config(const RunConfig& cfg) {
    Json root;
    root["model"] = {{"feature_dim", cfg.feature_dim},
                     {"component_count", cfg.component_count},
                     {"top_k", cfg.top_k},
                     {"hidden_dims", cfg.hidden_dims}};
    root["train"] = {{"warmup_epochs", cfg.train.warmup_epochs},
                     {"total_epochs", cfg.train.total_epochs},
                     {"batch_size", cfg.train.batch_size},
                     {"alpha", cfg.train.alpha},
                     {"cp_update_interval", cfg.train.cp_update_interval},
                     {"calibration_fraction", cfg.train.calibration_fraction},
                     {"lambda1", cfg.train.lambda1},
                     {"lambda2", cfg.train.lambda2},
                     {"gsc_a", cfg.train.gsc.a},
                     {"gsc_b", cfg.train.gsc.b},
                     {"seed", cfg.train.seed},
                     {"step_mode", to_string(cfg.train.step_mode)},
                     {"clip_norm", cfg.train.clip_norm},
                     {"optimizer",
                      {{"kind", to_string(cfg.train.optimizer.kind)},
                       {"learning_rate", cfg.train.optimizer.learning_rate},
                       {"momentum", cfg.train.optimizer.momentum},
                       {"beta1", cfg.train.optimizer.beta1},
                       {"beta2", cfg.train.optimizer.beta2},
                       {"eps_adam", cfg.train.optimizer.eps_adam},
                       {"eps_adagrad", cfg.train.optimizer.eps_adagrad}}}};
    Json mods = Json::array();
    for (const ModalitySpec& m : cfg.modalities)
        mods.push_back({{"input_dim", m.input_dim},
                        {"signal_strength", m.signal_strength},
                        {"noise_sigma", m.noise_sigma}});
    root["data"] = {{"class_count", cfg.class_count},
                    {"samples", cfg.pool_samples},
                    {"test_samples", cfg.test_samples},
                    {"seed", cfg.effective_data_seed()},
                    {"modalities", mods},
                    {"corruption",
                     {{"kind", to_string(cfg.corruption.kind)},
                      {"epsilon", cfg.corruption.epsilon},
                      {"target_modalities", cfg.corruption.target_modalities},
                      {"applied_at",
                       cfg.corruption.applied_at == CorruptionPhase::Train ? "train" : "test"}}}};
    return root;
}

} // namespace cpsc
