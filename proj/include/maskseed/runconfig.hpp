#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "maskseed/inference.hpp"
#include "maskseed/model.hpp"
#include "maskseed/sampler.hpp"

namespace maskseed {

// Merged view of every subsystem's knobs. Serialized as flat key=value lines
// with section prefixes (model.rank=64); unknown keys are rejected with the
// offending line. Every command echoes the effective config to a sidecar file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SamplerConfig sampler;
  SyntheticSpec synth;
  PyramidConfig pyramid;
  std::uint64_t seed = 42;

  static RunConfig desk();
  static RunConfig paper();
  static RunConfig preset(const std::string& name);

  void set_key(const std::string& key, const std::string& value);
  void apply_file(const std::string& path);
  void apply_overrides(const std::vector<std::string>& key_value_pairs);  // "k=v" strings
  std::string to_text() const;
  void validate() const;
};

}  // namespace maskseed
