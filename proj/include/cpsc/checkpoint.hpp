#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cpsc/errors.hpp"
#include "cpsc/model.hpp"
#include "cpsc/synth.hpp"

namespace cpsc {

/// Binary checkpoint: magic, a config-echo string, then every ParamBlock
/// value with a shape header. Round trips are bit-exact. Gradients and
/// optimizer slots are transient and not persisted.
inline void save_checkpoint(const CpscModel& model, const std::string& config_echo,
                            const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("save_checkpoint: cannot open " + path);
    os.write("CPSCCKPT", 8);
    detail::write_u64(os, 1); // format version
    detail::write_u64(os, config_echo.size());
    os.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
    const std::vector<const ParamBlock*> blocks = model.param_blocks();
    detail::write_u64(os, blocks.size());
    for (const ParamBlock* p : blocks) {
        detail::write_u64(os, p->value.rows);
        detail::write_u64(os, p->value.cols);
        for (double v : p->value.data) detail::write_f64(os, v);
    }
    if (!os) throw ConfigError("save_checkpoint: write failed for " + path);
}

/// Loads parameter values into a model built from the same config. Shape
/// mismatches are rejected. Returns the stored config echo.
inline std::string load_checkpoint(CpscModel& model, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::string(magic, 8) != "CPSCCKPT") throw ConfigError("load_checkpoint: bad magic");
    if (detail::read_u64(is) != 1) throw ConfigError("load_checkpoint: unsupported version");
    std::string echo(detail::read_u64(is), '\0');
    is.read(echo.data(), static_cast<std::streamsize>(echo.size()));
    std::vector<ParamBlock*> blocks = model.param_blocks();
    if (detail::read_u64(is) != blocks.size())
        throw ConfigError("load_checkpoint: block count mismatch");
    for (ParamBlock* p : blocks) {
        const std::uint64_t rows = detail::read_u64(is);
        const std::uint64_t cols = detail::read_u64(is);
        if (rows != p->value.rows || cols != p->value.cols)
            throw ConfigError("load_checkpoint: block shape mismatch");
        for (double& v : p->value.data) v = detail::read_f64(is);
    }
    if (!is) throw ConfigError("load_checkpoint: truncated file " + path);
    return echo;
}

} // namespace cpsc
