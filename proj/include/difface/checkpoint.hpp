#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "difface/seq_data.hpp"

namespace difface {

class FaceDecoder;

// On-disk layout (little endian):
//   "DFCK" | u32 version | u64 config hash | i32 epoch | i64 step | f64 best_val |
//   u8 optimizer-state flag | i64 optimizer step | str config JSON | str rng state |
//   u32 tensor count | { str name | u32 rows | u32 cols | rows*cols f64 row-major }
// where str = u32 length + bytes. Optimizer moments are stored as tensors
// "adam.m.<param>" / "adam.v.<param>".
struct Checkpoint {
    nlohmann::json config;  // {"model": DecoderConfig, "diffusion": {...}, "run": {...}}
    std::uint64_t config_hash = 0;
    int epoch = 0;
    std::int64_t step = 0;
    double best_val = 0.0;
    bool has_optimizer = false;
    std::int64_t optimizer_step = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Matrix>> tensors;

    const Matrix* find(const std::string& name) const;
};

// FNV-1a 64 of the canonical dump of config["model"] and config["diffusion"].
std::uint64_t config_hash(const nlohmann::json& config);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies every model parameter out of the checkpoint. Throws ConfigError when
// the checkpoint's hash differs from `expected_hash` or a tensor is missing/misshaped.
void load_parameters(FaceDecoder& model, const Checkpoint& ckpt, std::uint64_t expected_hash);

// Appends the model's parameters as tensors.
void store_parameters(const FaceDecoder& model, Checkpoint& ckpt);

}  // namespace difface
