#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "cpsc/errors.hpp"
#include "cpsc/rng.hpp"
#include "cpsc/tensor.hpp"

namespace cpsc {

enum class CorruptionKind { None, Gaussian, SaltPepper };
enum class CorruptionPhase { Train, Test };

inline std::string to_string(CorruptionKind k) {
    switch (k) {
        case CorruptionKind::None: return "none";
        case CorruptionKind::Gaussian: return "gaussian";
        case CorruptionKind::SaltPepper: return "salt_pepper";
    }
    return "none";
}

inline CorruptionKind corruption_kind_from_string(const std::string& s) {
    if (s == "none") return CorruptionKind::None;
    if (s == "gaussian") return CorruptionKind::Gaussian;
    if (s == "salt_pepper") return CorruptionKind::SaltPepper;
    throw ConfigError("unknown corruption kind: " + s);
}

struct ModalitySpec {
    int input_dim = 16;
    double signal_strength = 1.0; // scales the class prototype
    double noise_sigma = 0.3;     // ambient per-entry noise

    void validate() const {
        if (input_dim < 1) throw ConfigError("data: modality input_dim must be >= 1");
        if (signal_strength < 0.0) throw ConfigError("data: signal_strength must be >= 0");
        if (noise_sigma < 0.0) throw ConfigError("data: noise_sigma must be >= 0");
    }
};

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::None;
    double epsilon = 0.0;
    std::vector<int> target_modalities;
    CorruptionPhase applied_at = CorruptionPhase::Test;

    void validate(int modality_count) const {
        if (epsilon < 0.0) throw ConfigError("data: corruption epsilon must be >= 0");
        for (int m : target_modalities)
            if (m < 0 || m >= modality_count)
                throw ConfigError("data: corruption target modality out of range");
    }
};

struct GenSpec {
    int class_count = 4;
    int samples = 1000;
    std::vector<ModalitySpec> modalities;
    CorruptionSpec corruption;
    std::uint64_t seed = 0;

    void validate() const {
        if (class_count < 2) throw ConfigError("data: class_count must be >= 2");
        if (samples < 1) throw ConfigError("data: samples must be >= 1");
        if (modalities.size() < 2) throw ConfigError("data: need at least 2 modalities");
        for (const ModalitySpec& m : modalities) m.validate();
        corruption.validate(static_cast<int>(modalities.size()));
    }
};

/// One multimodal sample. The clean copies (noiseless class signal) are kept
/// for diagnostics only and must never be fed to training.
struct LabeledSample {
    std::vector<FeatureVector> features;
    std::vector<FeatureVector> clean_features;
    int label = 0;
};

struct Dataset {
    GenSpec spec;
    // prototypes[m][y]: fixed unit-norm class prototype per (modality, class)
    std::vector<std::vector<FeatureVector>> prototypes;
    std::vector<LabeledSample> samples;

    int modality_count() const { return static_cast<int>(spec.modalities.size()); }
};

/// x^m_i = strength_m * mu_{y_i,m} + N(0, sigma_m^2). Prototypes are fixed
/// unit-norm vectors keyed to (seed, modality, class); all per-sample
/// randomness is keyed to the sample index, so a dataset is a pure function
/// of its spec regardless of generation order.
inline Dataset generate(const GenSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    const int m_count = static_cast<int>(spec.modalities.size());

    ds.prototypes.resize(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) {
        ds.prototypes[m].resize(static_cast<std::size_t>(spec.class_count));
        for (int y = 0; y < spec.class_count; ++y) {
            CounterRng rng(rng_key(spec.seed, "proto", static_cast<std::uint64_t>(m),
                                   static_cast<std::uint64_t>(y)));
            FeatureVector proto(static_cast<std::size_t>(spec.modalities[m].input_dim));
            for (double& v : proto) v = rng.next_gaussian();
            const double norm = l2_norm(proto);
            if (norm > 0.0)
                for (double& v : proto) v /= norm;
            ds.prototypes[m][y] = std::move(proto);
        }
    }

    ds.samples.resize(static_cast<std::size_t>(spec.samples));
    for (int i = 0; i < spec.samples; ++i) {
        LabeledSample& s = ds.samples[static_cast<std::size_t>(i)];
        CounterRng label_rng(rng_key(spec.seed, "label", static_cast<std::uint64_t>(i)));
        s.label = label_rng.next_int(spec.class_count);
        s.features.resize(static_cast<std::size_t>(m_count));
        s.clean_features.resize(static_cast<std::size_t>(m_count));
        for (int m = 0; m < m_count; ++m) {
            const ModalitySpec& ms = spec.modalities[m];
            const FeatureVector& proto = ds.prototypes[m][s.label];
            FeatureVector clean(static_cast<std::size_t>(ms.input_dim));
            for (std::size_t j = 0; j < clean.size(); ++j)
                clean[j] = ms.signal_strength * proto[j];
            CounterRng noise_rng(rng_key(spec.seed, "noise", static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(m)));
            FeatureVector noisy = clean;
            for (double& v : noisy) v += ms.noise_sigma * noise_rng.next_gaussian();
            s.clean_features[m] = std::move(clean);
            s.features[m] = std::move(noisy);
        }
    }
    return ds;
}

/// In-place corruption of one feature vector. Gaussian adds N(0, eps^2);
/// salt-pepper replaces each entry with probability min(eps/20, 1) by lo or
/// hi (fair coin). kind == None or eps == 0 is the identity.
inline void corrupt_features(FeatureVector& features, CorruptionKind kind, double epsilon,
                             CounterRng& rng, double lo, double hi) {
    if (kind == CorruptionKind::None || epsilon == 0.0) return;
    if (epsilon < 0.0) throw ConfigError("corrupt: epsilon must be >= 0");
    if (kind == CorruptionKind::Gaussian) {
        for (double& v : features) v += epsilon * rng.next_gaussian();
    } else {
        const double p = std::min(epsilon / 20.0, 1.0);
        for (double& v : features) {
            if (rng.next_double() < p) v = (rng.next_double() < 0.5) ? lo : hi;
        }
    }
}

/// Per-modality value range over the whole dataset; salt-pepper extremes are
/// taken from these so "extreme value" is meaningful for abstract features.
inline void modality_range(const Dataset& ds, int m, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
    for (const LabeledSample& s : ds.samples) {
        for (double v : s.features[static_cast<std::size_t>(m)]) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!(lo <= hi)) {
        lo = 0.0;
        hi = 0.0;
    }
}

/// Applies the spec's corruption to the listed target modalities of every
/// sample, keyed per (seed, sample, modality).
inline void apply_corruption(Dataset& ds, const CorruptionSpec& spec, std::uint64_t seed) {
    if (spec.kind == CorruptionKind::None || spec.epsilon == 0.0) return;
    spec.validate(ds.modality_count());
    std::vector<double> lo(ds.spec.modalities.size()), hi(ds.spec.modalities.size());
    for (int m : spec.target_modalities) modality_range(ds, m, lo[m], hi[m]);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        for (int m : spec.target_modalities) {
            CounterRng rng(rng_key(seed, "corrupt", i, static_cast<std::uint64_t>(m)));
            corrupt_features(ds.samples[i].features[static_cast<std::size_t>(m)], spec.kind,
                             spec.epsilon, rng, lo[static_cast<std::size_t>(m)],
                             hi[static_cast<std::size_t>(m)]);
        }
    }
}

// ---------------------------------------------------------------------------
// Binary dump/load, bit-exact round trip
// ---------------------------------------------------------------------------

namespace detail {
inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
inline double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
inline void write_vec(std::ostream& os, const FeatureVector& v) {
    write_u64(os, v.size());
    for (double x : v) write_f64(os, x);
}
inline FeatureVector read_vec(std::istream& is) {
    FeatureVector v(read_u64(is));
    for (double& x : v) x = read_f64(is);
    return v;
}
} // namespace detail

inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("save_dataset: cannot open " + path);
    os.write("CPSCDATA", 8);
    detail::write_u64(os, 1); // format version
    detail::write_u64(os, static_cast<std::uint64_t>(ds.spec.class_count));
    detail::write_u64(os, static_cast<std::uint64_t>(ds.spec.samples));
    detail::write_u64(os, ds.spec.seed);
    detail::write_u64(os, ds.spec.modalities.size());
    for (const ModalitySpec& m : ds.spec.modalities) {
        detail::write_u64(os, static_cast<std::uint64_t>(m.input_dim));
        detail::write_f64(os, m.signal_strength);
        detail::write_f64(os, m.noise_sigma);
    }
    for (const auto& per_mod : ds.prototypes)
        for (const FeatureVector& proto : per_mod) detail::write_vec(os, proto);
    for (const LabeledSample& s : ds.samples) {
        detail::write_u64(os, static_cast<std::uint64_t>(s.label));
        for (const FeatureVector& f : s.features) detail::write_vec(os, f);
        for (const FeatureVector& f : s.clean_features) detail::write_vec(os, f);
    }
    if (!os) throw ConfigError("save_dataset: write failed for " + path);
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("load_dataset: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "CPSCDATA") throw ConfigError("load_dataset: bad magic");
    if (detail::read_u64(is) != 1) throw ConfigError("load_dataset: unsupported version");
    Dataset ds;
    ds.spec.class_count = static_cast<int>(detail::read_u64(is));
    ds.spec.samples = static_cast<int>(detail::read_u64(is));
    ds.spec.seed = detail::read_u64(is);
    ds.spec.modalities.resize(detail::read_u64(is));
    for (ModalitySpec& m : ds.spec.modalities) {
        m.input_dim = static_cast<int>(detail::read_u64(is));
        m.signal_strength = detail::read_f64(is);
        m.noise_sigma = detail::read_f64(is);
    }
    ds.prototypes.resize(ds.spec.modalities.size());
    for (auto& per_mod : ds.prototypes) {
        per_mod.resize(static_cast<std::size_t>(ds.spec.class_count));
        for (FeatureVector& proto : per_mod) proto = detail::read_vec(is);
    }
    ds.samples.resize(static_cast<std::size_t>(ds.spec.samples));
    for (LabeledSample& s : ds.samples) {
        s.label = static_cast<int>(detail::read_u64(is));
        s.features.resize(ds.spec.modalities.size());
        for (FeatureVector& f : s.features) f = detail::read_vec(is);
        s.clean_features.resize(ds.spec.modalities.size());
        for (FeatureVector& f : s.clean_features) f = detail::read_vec(is);
    }
    if (!is) throw ConfigError("load_dataset: truncated file " + path);
    return ds;
}

} // namespace cpsc
