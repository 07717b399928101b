#pragma once

#include <cstdint>
#include <string>

#include "vqi2i/latent_lm.hpp"
#include "vqi2i/objectives.hpp"

namespace vqi2i {

struct OptimConfig {
    double lr = 1e-3;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct TrainConfig {
    uint64_t seed = 1;
    int steps = 1200;
    int batch = 1;
    int lm_steps = 400;
    int lm_batch = 8;
    double lm_lr = 1e-3;
    int log_every = 1;
    std::string metrics;  // StepReport log path; empty disables logging
    bool uni = false;     // single-domain objective (no style/content terms)
};

struct DataConfig {
    std::string dir_x;
    std::string dir_y;
    // When > 0 and a domain directory is missing, `train` synthesizes this
    // many paired toy images into it before loading.
    int toy_count = 0;
};

// Flat INI-style configuration covering the whole pipeline. lm.vocab is
// always mirrored from the codebook size and is not a file key.
struct Config {
    NetConfig net;
    LossWeights weights;
    LmConfig lm;
    SamplerParams sampler;
    OptimConfig optim;
    TrainConfig train;
    DataConfig data;

    void finalize();  // syncs lm.vocab and validates every section
};

Config default_config();

// Parses `key = value` lines under [section] headers; '#' and ';' start
// comments. Unknown sections or keys are errors naming `origin` and the
// line number.
Config parse_config_text(const std::string& text, const std::string& origin);

// Reads and parses the file, then applies the VQI2I_SEED environment
// override if present.
Config load_config(const std::string& path);

// Canonical text form: parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const Config& c);

}  // namespace vqi2i
