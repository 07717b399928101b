#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqi2i/adam.hpp"
#include "vqi2i/config.hpp"
#include "vqi2i/latent_lm.hpp"
#include "vqi2i/nets.hpp"

namespace vqi2i {

// Self-describing binary container: magic "VQI2I\x01", format version u16,
// entry count u32, then per entry name-length/name/rank/dims/f64 payload
// (all little-endian), closed by a CRC32 footer over everything before it.
// Writes go to a temp file and are renamed into place, so a partial write
// never leaves a readable checkpoint behind.
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

struct CheckpointData {
    std::vector<CheckpointEntry> entries;

    void add(std::string name, Shape shape, std::vector<double> data);
    void add_scalar(std::string name, double v);
    void add_text(std::string name, const std::string& text);
    void add_params(const Params& ps, const std::string& prefix = "");
    void add_adam(const Adam& opt, const std::string& prefix);

    const CheckpointEntry* find(const std::string& name) const;
    const CheckpointEntry& get(const std::string& name) const;  // missing -> error
    double scalar(const std::string& name) const;
    std::string text(const std::string& name) const;
    // Copies values into same-named registered tensors; missing entries or
    // shape mismatches are errors.
    void load_params(const Params& ps, const std::string& prefix = "") const;
    void load_adam(Adam& opt, const std::string& prefix) const;
};

void save_checkpoint_file(const std::string& path, const CheckpointData& ck);
CheckpointData load_checkpoint_file(const std::string& path);

// A full training artifact: config snapshot, translation model, step
// counters, optional latent LM, optional optimizer state.
struct SaveBundle {
    const Config* config = nullptr;
    const TranslationModel* model = nullptr;
    int64_t step = 0;
    const Adam* opt_g = nullptr;
    const Adam* opt_d = nullptr;
    const LatentLm* lm = nullptr;
    const Params* lm_params = nullptr;
    int64_t lm_step = 0;
    const Adam* opt_lm = nullptr;
    double usage = -1.0;  // last observed codebook usage fraction, if known
};

void save_bundle(const std::string& path, const SaveBundle& b);

struct LoadedBundle {
    Config config;
    TranslationModel model;
    int64_t step = 0;
    bool has_lm = false;
    LatentLm lm;
    Params lm_params;
    int64_t lm_step = 0;
    double usage = -1.0;
    CheckpointData raw;  // for optimizer-state restoration on resume

    bool has_opt(const std::string& prefix) const;
};

LoadedBundle load_bundle(const std::string& path);

}  // namespace vqi2i
