#include "maskseed/model.hpp"

#include <sstream>

namespace maskseed {

std::vector<TrunkOp> parse_trunk_spec(const std::string& spec) {
  std::vector<TrunkOp> ops;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    if (tok == "P") {
      ops.push_back({true, 0});
    } else if (tok[0] == 'C') {
      int ch = 0;
      try {
        ch = std::stoi(tok.substr(1));
      } catch (const std::exception&) {
        throw ConfigError("bad trunk token '" + tok + "' in spec '" + spec + "'");
      }
      if (ch <= 0) throw ConfigError("trunk conv channels must be positive in '" + spec + "'");
      ops.push_back({false, ch});
    } else {
      throw ConfigError("bad trunk token '" + tok + "' in spec '" + spec + "'");
    }
  }
  if (ops.empty()) throw ConfigError("empty trunk spec");
  return ops;
}

std::string trunk_spec_to_string(const std::vector<TrunkOp>& ops) {
  std::string out;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (i) out += ",";
    out += ops[i].pool ? "P" : "C" + std::to_string(ops[i].channels);
  }
  return out;
}

int ModelConfig::trunk_channels() const {
  int c = 3;
  for (const TrunkOp& op : trunk_ops()) {
    if (!op.pool) c = op.channels;
  }
  return c;
}

void ModelConfig::validate() const {
  if (patch_size <= 0 || patch_size % 32 != 0) {
    throw ConfigError("patch_size must be a positive multiple of 32, got " +
                      std::to_string(patch_size));
  }
  const auto ops = trunk_ops();
  int pools = 0;
  bool any_conv = false;
  for (const TrunkOp& op : ops) {
    if (op.pool) ++pools;
    else any_conv = true;
  }
  if (pools != 4) {
    throw ConfigError("trunk must contain exactly 4 pool stages (downsample 16), got " +
                      std::to_string(pools));
  }
  if (!any_conv) throw ConfigError("trunk must contain at least one conv layer");
  if (mask_out <= 0 || mask_out > patch_size) {
    throw ConfigError("mask_out must be in (0, patch_size]");
  }
  if (rank <= 0 && !full_rank) throw ConfigError("rank must be positive");
  if (score_hidden1 <= 0 || score_hidden2 <= 0) throw ConfigError("score hidden sizes must be positive");
  if (dropout_rate < 0 || dropout_rate >= 1) throw ConfigError("dropout_rate must be in [0,1)");
  if (trunk_cells() % 2 != 0) {
    throw ConfigError("patch_size/16 must be even for the scoring head pool");
  }
}

std::string ModelConfig::geometry_str() const {
  std::ostringstream os;
  os << "patch=" << patch_size << " trunk=" << trunk << " rank=" << rank
     << " mask_out=" << mask_out << " score_hidden=" << score_hidden1 << "/" << score_hidden2
     << " full_rank=" << (full_rank ? 1 : 0);
  return os.str();
}

ModelConfig desk_model_config() {
  ModelConfig cfg;
  cfg.patch_size = 64;
  cfg.trunk = "C8,C8,P,C16,C16,P,C24,C24,P,C32,C32,P";
  cfg.rank = 64;
  cfg.mask_out = 16;
  cfg.score_hidden1 = 64;
  cfg.score_hidden2 = 128;
  cfg.full_rank = false;
  cfg.dropout_rate = 0.5;
  return cfg;
}

ModelConfig paper_model_config() {
  ModelConfig cfg;
  cfg.patch_size = 224;
  cfg.trunk = "C64,P,C128,P,C256,C256,P,C512,C512,P,C512,C512";
  cfg.rank = 512;
  cfg.mask_out = 56;
  cfg.score_hidden1 = 512;
  cfg.score_hidden2 = 1024;
  cfg.full_rank = false;
  cfg.dropout_rate = 0.5;
  return cfg;
}

std::size_t seg_head_param_count(const ModelConfig& cfg, bool full_rank) {
  const std::size_t c = static_cast<std::size_t>(cfg.trunk_channels());
  const std::size_t flat = static_cast<std::size_t>(cfg.flat_features());
  const std::size_t mask_n = static_cast<std::size_t>(cfg.mask_out) * cfg.mask_out;
  std::size_t n = c * c + c;  // 1×1 conv
  if (full_rank) {
    n += flat * mask_n + mask_n;
  } else {
    const std::size_t r = static_cast<std::size_t>(cfg.rank);
    n += flat * r + r + r * mask_n + mask_n;
  }
  return n;
}

}  // namespace maskseed
