#pragma once

#include <cstdint>
#include <string>

#include "hibert/encoder.hpp"
#include "hibert/pretrain.hpp"

namespace hibert {

/// Self-describing versioned binary snapshot: model config, every named
/// tensor (flat 64-bit little-endian), Adam state, trainer position and the
/// run seed. save -> load -> save is byte-identical.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  AdamState adam;
  TrainerState trainer;
  uint64_t seed = 0;
};

void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& adam,
                     const TrainerState& trainer, uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

/// Load and reject on config mismatch.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace hibert
