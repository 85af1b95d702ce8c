#include "maskseed/weights_io.hpp"

#include <cstring>
#include <sstream>

#include "maskseed/io.hpp"

namespace maskseed {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  std::string path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw DataError("truncated weights file: " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::map<std::string, std::string> config_to_lines(const ModelConfig& cfg) {
  std::map<std::string, std::string> kv;
  kv["patch_size"] = std::to_string(cfg.patch_size);
  kv["trunk"] = cfg.trunk;
  kv["rank"] = std::to_string(cfg.rank);
  kv["mask_out"] = std::to_string(cfg.mask_out);
  kv["score_hidden1"] = std::to_string(cfg.score_hidden1);
  kv["score_hidden2"] = std::to_string(cfg.score_hidden2);
  kv["full_rank"] = cfg.full_rank ? "1" : "0";
  std::ostringstream dr;
  dr.precision(17);
  dr << cfg.dropout_rate;
  kv["dropout_rate"] = dr.str();
  return kv;
}

ModelConfig config_from_lines(const std::map<std::string, std::string>& kv,
                              const std::string& path) {
  ModelConfig cfg;
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("weights file missing key '") + key + "': " + path);
    return it->second;
  };
  cfg.patch_size = std::stoi(get("patch_size"));
  cfg.trunk = get("trunk");
  cfg.rank = std::stoi(get("rank"));
  cfg.mask_out = std::stoi(get("mask_out"));
  cfg.score_hidden1 = std::stoi(get("score_hidden1"));
  cfg.score_hidden2 = std::stoi(get("score_hidden2"));
  cfg.full_rank = get("full_rank") == "1";
  cfg.dropout_rate = std::stod(get("dropout_rate"));
  return cfg;
}

}  // namespace

void save_weights(const std::string& path, const ModelConfig& cfg, ModelParams<float>& params,
                  const std::map<std::string, std::string>& extra, bool include_momentum) {
  std::string out;
  out += "DMSK";
  put_u32(out, kFormatVersion);

  std::string header;
  for (const auto& [k, v] : config_to_lines(cfg)) header += k + "=" + v + "\n";
  for (const auto& [k, v] : extra) header += k + "=" + v + "\n";
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;

  std::vector<std::pair<std::string, Tensor<float>*>> tensors;
  for_each_param(params, cfg.full_rank,
                 [&](const std::string& name, Tensor<float>& t, Tensor<float>& m) {
                   tensors.emplace_back(name, &t);
                   if (include_momentum) tensors.emplace_back(name + ".m", &m);
                 });
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (auto& [name, t] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) put_u64(out, static_cast<std::uint64_t>(d));
    out.append(reinterpret_cast<const char*>(t->data.data()), t->data.size() * sizeof(float));
  }
  atomic_write_file(path, out);
}

LoadedWeights load_weights(const std::string& path, bool load_momentum) {
  const std::string buf = read_file(path);
  Reader r{buf, 0, path};
  if (r.bytes(4) != "DMSK") throw DataError("not a weights file (bad magic): " + path);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw DataError("unsupported weights format version " + std::to_string(version) + ": " + path);
  }
  const std::uint32_t header_len = r.u32();
  std::string header = r.bytes(header_len);
  std::map<std::string, std::string> kv;
  std::istringstream hs(header);
  std::string line;
  while (std::getline(hs, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }

  LoadedWeights lw;
  lw.config = config_from_lines(kv, path);
  lw.config.validate();
  for (const auto& [k, v] : kv) {
    if (k.rfind("state.", 0) == 0) lw.extra[k] = v;
  }

  std::map<std::string, Tensor<float>> loaded;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const std::uint32_t trank = r.u32();
    if (trank == 0 || trank > 8) throw DataError("bad tensor rank in weights file: " + path);
    std::vector<int> shape(trank);
    for (auto& d : shape) d = static_cast<int>(r.u64());
    Tensor<float> t(shape);
    const std::size_t bytes = t.numel() * sizeof(float);
    r.need(bytes);
    std::memcpy(t.data.data(), buf.data() + r.pos, bytes);
    r.pos += bytes;
    loaded.emplace(name, std::move(t));
  }

  Rng dummy(0);
  lw.params = build_model<float>(lw.config, dummy);
  std::string missing;
  for_each_param(lw.params, lw.config.full_rank,
                 [&](const std::string& name, Tensor<float>& t, Tensor<float>& m) {
                   auto it = loaded.find(name);
                   if (it == loaded.end()) {
                     missing += missing.empty() ? name : ", " + name;
                     return;
                   }
                   if (it->second.shape != t.shape) {
                     throw DataError("tensor '" + name + "' has shape " + shape_str(it->second.shape) +
                                     ", model geometry wants " + shape_str(t.shape) + ": " + path);
                   }
                   t = std::move(it->second);
                   if (load_momentum) {
                     auto mit = loaded.find(name + ".m");
                     if (mit != loaded.end()) m = std::move(mit->second);
                   }
                 });
  if (!missing.empty()) throw DataError("weights file missing tensors [" + missing + "]: " + path);
  return lw;
}

LoadedWeights load_weights_expect(const std::string& path, const ModelConfig& expected) {
  LoadedWeights lw = load_weights(path);
  if (!(lw.config == expected)) {
    throw DataError("weights geometry mismatch for " + path + "\n  file:     " +
                    lw.config.geometry_str() + "\n  expected: " + expected.geometry_str());
  }
  return lw;
}

}  // namespace maskseed
