#pragma once

#include <map>
#include <string>

#include "maskseed/model.hpp"

namespace maskseed {

// Weights file: magic "DMSK", u32 format version, a length-prefixed block of
// UTF-8 key=value lines carrying the model geometry (and optional extra state
// such as optimizer step or rng positions), then a u32 tensor count followed
// by per-tensor records: u32 name length + name bytes, u32 rank, dims as u64,
// payload as little-endian f32. Round-trips bit-exactly.

struct LoadedWeights {
  ModelConfig config;
  ModelParams<float> params;
  std::map<std::string, std::string> extra;  // "state.*" lines from the header
};

void save_weights(const std::string& path, const ModelConfig& cfg, ModelParams<float>& params,
                  const std::map<std::string, std::string>& extra = {},
                  bool include_momentum = false);

LoadedWeights load_weights(const std::string& path, bool load_momentum = false);

// Loads and fails with both geometries in the message when they differ.
LoadedWeights load_weights_expect(const std::string& path, const ModelConfig& expected);

}  // namespace maskseed
