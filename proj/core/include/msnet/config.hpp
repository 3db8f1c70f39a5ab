#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "msnet/data.hpp"
#include "msnet/losses.hpp"
#include "msnet/model.hpp"

namespace msnet {

// Everything a run needs: architecture, loss, optimizer, schedule, data.
// Defaults are the desk-scale configuration; the reference-scale training
// protocol (50 epochs, batch 16, input 352, 64 channels) is expressible.
struct RunConfig {
    ModelConfig model;
    LossConfig loss;

    double momentum = 0.9;
    double weight_decay = 0.0005;
    double lr_backbone_max = 0.005;
    double lr_head_max = 0.05;
    double clip_norm = 0.5;  // per-group gradient norm clip; <= 0 disables
    int epochs = 30;
    int batch_size = 8;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 1;

    std::string data_dir;
    std::string out_dir = "out";
    double threshold = 0.5;

    // Dataset generation knobs (gen-data / ablate).
    int gen_n = 100;
    Difficulty gen_difficulty = Difficulty::easy;
    double ratio_train = 0.8;
    double ratio_val = 0.1;
    double ratio_test = 0.1;

    bool pool_k_explicit = false;  // pool_k stays derived from input_size until set

    void validate() const;
    // Re-derives dependent defaults (pool_k from input_size unless explicit).
    void finalize();
};

// Parses "key = value" lines ('#' starts a comment, blank lines ignored)
// into cfg. Unknown keys and malformed lines are parse errors naming the
// line number.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Applies a single key/value pair; shared by the file parser and CLI.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        const std::string& where);

// Canonical "key = value" serialization covering every field, suitable for
// writing next to a run and for hashing.
std::string serialize_config(const RunConfig& cfg);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace msnet
