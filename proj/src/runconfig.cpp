#include "maskseed/runconfig.hpp"

#include <cmath>
#include <sstream>

#include "maskseed/io.hpp"

namespace maskseed {

RunConfig RunConfig::desk() {
  RunConfig cfg;
  cfg.model = desk_model_config();
  cfg.train.score_loss_weight = 1.0 / 32.0;
  cfg.train.optimizer.learning_rate = 0.01;
  cfg.train.optimizer.momentum = 0.9;
  cfg.train.optimizer.weight_decay = 0.00005;
  cfg.train.optimizer.batch_size = 32;
  cfg.train.steps = 3000;
  cfg.sampler.canonical_max_dim = canonical_max_dim_for_patch(cfg.model.patch_size);
  cfg.synth = SyntheticSpec{};
  cfg.pyramid = PyramidConfig{};
  return cfg;
}

RunConfig RunConfig::paper() {
  RunConfig cfg = desk();
  cfg.model = paper_model_config();
  cfg.train.optimizer.learning_rate = 0.001;
  cfg.sampler.canonical_max_dim = canonical_max_dim_for_patch(cfg.model.patch_size);
  return cfg;
}

RunConfig RunConfig::preset(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw UsageError("unknown preset '" + name + "' (expected desk or paper)");
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw DataError("config key " + key + ": expected 0/1, got '" + v + "'");
}

std::vector<double> parse_double_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void RunConfig::set_key(const std::string& key, const std::string& value) {
  try {
    if (key == "seed") seed = std::stoull(value);
    else if (key == "model.patch_size") model.patch_size = std::stoi(value);
    else if (key == "model.trunk") model.trunk = value;
    else if (key == "model.rank") model.rank = std::stoi(value);
    else if (key == "model.mask_out") model.mask_out = std::stoi(value);
    else if (key == "model.score_hidden1") model.score_hidden1 = std::stoi(value);
    else if (key == "model.score_hidden2") model.score_hidden2 = std::stoi(value);
    else if (key == "model.full_rank") model.full_rank = parse_bool(value, key);
    else if (key == "model.dropout_rate") model.dropout_rate = std::stod(value);
    else if (key == "train.score_loss_weight") train.score_loss_weight = std::stod(value);
    else if (key == "train.lr") train.optimizer.learning_rate = std::stod(value);
    else if (key == "train.momentum") train.optimizer.momentum = std::stod(value);
    else if (key == "train.weight_decay") train.optimizer.weight_decay = std::stod(value);
    else if (key == "train.batch") train.optimizer.batch_size = std::stoi(value);
    else if (key == "train.decay_bias") train.optimizer.decay_bias = parse_bool(value, key);
    else if (key == "train.steps") train.steps = std::stol(value);
    else if (key == "train.seg_steps_per_cycle") train.seg_steps_per_cycle = std::stoi(value);
    else if (key == "train.score_steps_per_cycle") train.score_steps_per_cycle = std::stoi(value);
    else if (key == "train.mean_reduction") train.mean_reduction = parse_bool(value, key);
    else if (key == "train.checkpoint_every") train.checkpoint_every = std::stoi(value);
    else if (key == "sampler.canonical_max_dim") sampler.canonical_max_dim = std::stoi(value);
    else if (key == "sampler.jitter_translate") sampler.jitter_translate = std::stod(value);
    else if (key == "sampler.jitter_scale_exp") sampler.jitter_scale_exp = std::stod(value);
    else if (key == "sampler.hflip") sampler.hflip = parse_bool(value, key);
    else if (key == "sampler.negative_translate") sampler.negative_translate = std::stod(value);
    else if (key == "sampler.negative_scale_exp") sampler.negative_scale_exp = std::stod(value);
    else if (key == "sampler.max_attempts") sampler.max_attempts = std::stoi(value);
    else if (key == "synth.image_size") synth.image_size = std::stoi(value);
    else if (key == "synth.min_shapes") synth.min_shapes = std::stoi(value);
    else if (key == "synth.max_shapes") synth.max_shapes = std::stoi(value);
    else if (key == "synth.min_size") synth.min_size = std::stod(value);
    else if (key == "synth.max_size") synth.max_size = std::stod(value);
    else if (key == "synth.noise_sigma") synth.noise_sigma = std::stod(value);
    else if (key == "synth.occlusion") synth.occlusion = parse_bool(value, key);
    else if (key == "synth.min_visible_area") synth.min_visible_area = std::stoi(value);
    else if (key == "pyramid.scales") pyramid.scales = parse_double_list(value);
    else if (key == "pyramid.stride") pyramid.stride = std::stoi(value);
    else if (key == "pyramid.zoom") pyramid.zoom = parse_bool(value, key);
    else if (key == "pyramid.mask_threshold") pyramid.mask_threshold = std::stod(value);
    else if (key == "pyramid.max_proposals") pyramid.max_proposals = std::stoi(value);
    else throw DataError("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw DataError("config key " + key + ": cannot parse value '" + value + "'");
  } catch (const std::out_of_range&) {
    throw DataError("config key " + key + ": value out of range '" + value + "'");
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::istringstream ss(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set_key(line.substr(start, eq - start), line.substr(eq + 1));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& key_value_pairs) {
  for (const std::string& kv : key_value_pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    set_key(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "seed=" << seed << "\n";
  os << "model.patch_size=" << model.patch_size << "\n";
  os << "model.trunk=" << model.trunk << "\n";
  os << "model.rank=" << model.rank << "\n";
  os << "model.mask_out=" << model.mask_out << "\n";
  os << "model.score_hidden1=" << model.score_hidden1 << "\n";
  os << "model.score_hidden2=" << model.score_hidden2 << "\n";
  os << "model.full_rank=" << (model.full_rank ? 1 : 0) << "\n";
  os << "model.dropout_rate=" << format_double(model.dropout_rate) << "\n";
  os << "train.score_loss_weight=" << format_double(train.score_loss_weight) << "\n";
  os << "train.lr=" << format_double(train.optimizer.learning_rate) << "\n";
  os << "train.momentum=" << format_double(train.optimizer.momentum) << "\n";
  os << "train.weight_decay=" << format_double(train.optimizer.weight_decay) << "\n";
  os << "train.batch=" << train.optimizer.batch_size << "\n";
  os << "train.decay_bias=" << (train.optimizer.decay_bias ? 1 : 0) << "\n";
  os << "train.steps=" << train.steps << "\n";
  os << "train.seg_steps_per_cycle=" << train.seg_steps_per_cycle << "\n";
  os << "train.score_steps_per_cycle=" << train.score_steps_per_cycle << "\n";
  os << "train.mean_reduction=" << (train.mean_reduction ? 1 : 0) << "\n";
  os << "train.checkpoint_every=" << train.checkpoint_every << "\n";
  os << "sampler.canonical_max_dim=" << sampler.canonical_max_dim << "\n";
  os << "sampler.jitter_translate=" << format_double(sampler.jitter_translate) << "\n";
  os << "sampler.jitter_scale_exp=" << format_double(sampler.jitter_scale_exp) << "\n";
  os << "sampler.hflip=" << (sampler.hflip ? 1 : 0) << "\n";
  os << "sampler.negative_translate=" << format_double(sampler.negative_translate) << "\n";
  os << "sampler.negative_scale_exp=" << format_double(sampler.negative_scale_exp) << "\n";
  os << "sampler.max_attempts=" << sampler.max_attempts << "\n";
  os << "synth.image_size=" << synth.image_size << "\n";
  os << "synth.min_shapes=" << synth.min_shapes << "\n";
  os << "synth.max_shapes=" << synth.max_shapes << "\n";
  os << "synth.min_size=" << format_double(synth.min_size) << "\n";
  os << "synth.max_size=" << format_double(synth.max_size) << "\n";
  os << "synth.noise_sigma=" << format_double(synth.noise_sigma) << "\n";
  os << "synth.occlusion=" << (synth.occlusion ? 1 : 0) << "\n";
  os << "synth.min_visible_area=" << synth.min_visible_area << "\n";
  std::string scales;
  for (double s : pyramid.scales) scales += (scales.empty() ? "" : ",") + format_double(s);
  os << "pyramid.scales=" << scales << "\n";
  os << "pyramid.stride=" << pyramid.stride << "\n";
  os << "pyramid.zoom=" << (pyramid.zoom ? 1 : 0) << "\n";
  os << "pyramid.mask_threshold=" << format_double(pyramid.mask_threshold) << "\n";
  os << "pyramid.max_proposals=" << pyramid.max_proposals << "\n";
  return os.str();
}

void RunConfig::validate() const {
  model.validate();
  train.optimizer.validate();
  sampler.validate();
  if (train.score_loss_weight <= 0) throw ConfigError("train.score_loss_weight must be > 0");
  if (train.seg_steps_per_cycle < 0 || train.score_steps_per_cycle < 0 ||
      train.seg_steps_per_cycle + train.score_steps_per_cycle == 0) {
    throw ConfigError("alternation cycle must contain at least one step");
  }
  if (pyramid.stride != 16) throw ConfigError("pyramid.stride must equal the trunk downsample (16)");
  if (synth.min_shapes < 0 || synth.max_shapes < synth.min_shapes) {
    throw ConfigError("synth shape count range invalid");
  }
  if (synth.image_size < 16) throw ConfigError("synth.image_size too small");
}

}  // namespace maskseed
