#include "maskseed/inference.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "maskseed/io.hpp"

namespace maskseed {

using json = nlohmann::json;

std::vector<double> default_pyramid_scales(bool zoom) {
  std::vector<double> scales;
  if (zoom) scales.push_back(std::exp2(-2.5));
  for (double e = -2.0; e <= 1.0 + 1e-9; e += 0.5) scales.push_back(std::exp2(e));
  return scales;
}

int trunk_margin_cells(const ModelConfig& cfg) {
  // receptive field: rf += (k−1)·stride_so_far per layer
  long rf = 1;
  long stride = 1;
  for (const TrunkOp& op : cfg.trunk_ops()) {
    if (op.pool) {
      rf += stride;  // (2−1)·stride
      stride *= 2;
    } else {
      rf += 2 * stride;  // (3−1)·stride
    }
  }
  const long half = (rf - 1) / 2 + ((rf - 1) % 2 ? 1 : 0);
  return static_cast<int>((half + 15) / 16);
}

namespace {

int round_to_mult32(double v) {
  const int r = static_cast<int>(std::floor(v / 32.0 + 0.5)) * 32;
  return std::max(32, r);
}

float clamp_sample(const Tensor<float>& img, int c, int x, int y) {
  const int h = img.dim(1), w = img.dim(2);
  x = std::clamp(x, 0, w - 1);
  y = std::clamp(y, 0, h - 1);
  return img.at3(c, y, x);
}

}  // namespace

BuiltPyramid build_pyramid(const Tensor<float>& image, const PyramidConfig& cfg, int patch_size) {
  if (image.rank() != 3 || image.dim(0) != 3) throw UsageError("build_pyramid: image must be 3×H×W");
  std::vector<double> scales = cfg.scales.empty() ? default_pyramid_scales(cfg.zoom) : cfg.scales;
  for (std::size_t i = 1; i < scales.size(); ++i) {
    if (scales[i] <= scales[i - 1]) throw ConfigError("pyramid scales must be strictly increasing");
  }
  const int oh = image.dim(1), ow = image.dim(2);
  BuiltPyramid out;
  for (double s : scales) {
    const int lh = round_to_mult32(oh * s);
    const int lw = round_to_mult32(ow * s);
    if (lh < patch_size || lw < patch_size) {
      out.notices.push_back("scale " + std::to_string(s) + " skipped: level " + std::to_string(lw) +
                            "x" + std::to_string(lh) + " smaller than one patch");
      continue;
    }
    PyramidLevel level;
    level.nominal_scale = s;
    level.sy = static_cast<double>(lh) / oh;
    level.sx = static_cast<double>(lw) / ow;
    level.image = Tensor<float>({3, lh, lw});
    for (int y = 0; y < lh; ++y) {
      const double gy = (y + 0.5) / level.sy - 0.5;
      const int y0 = static_cast<int>(std::floor(gy));
      const double ty = gy - y0;
      for (int x = 0; x < lw; ++x) {
        const double gx = (x + 0.5) / level.sx - 0.5;
        const int x0 = static_cast<int>(std::floor(gx));
        const double tx = gx - x0;
        for (int c = 0; c < 3; ++c) {
          const double v00 = clamp_sample(image, c, x0, y0);
          const double v01 = clamp_sample(image, c, x0 + 1, y0);
          const double v10 = clamp_sample(image, c, x0, y0 + 1);
          const double v11 = clamp_sample(image, c, x0 + 1, y0 + 1);
          const double top = v00 + (v01 - v00) * tx;
          const double bot = v10 + (v11 - v10) * tx;
          level.image.at3(c, y, x) = static_cast<float>(top + (bot - top) * ty);
        }
      }
    }
    out.levels.push_back(std::move(level));
  }
  return out;
}

std::vector<Proposal> extract_proposals(const std::vector<DenseOutput<float>>& outputs,
                                        const std::vector<PyramidLevel>& levels, int orig_w,
                                        int orig_h, const ModelConfig& mcfg,
                                        const PyramidConfig& pcfg) {
  if (outputs.size() != levels.size()) throw UsageError("extract_proposals: outputs/levels mismatch");
  std::vector<Proposal> proposals;
  std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(orig_w) * orig_h, 0);
  const int patch = mcfg.patch_size;
  const int mask_n = mcfg.mask_out * mcfg.mask_out;

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const PyramidLevel& level = levels[li];
    const DenseOutput<float>& dense = outputs[li];
    for (int gi = 0; gi < dense.grid_h; ++gi) {
      for (int gj = 0; gj < dense.grid_w; ++gj) {
        const float* logits = dense.mask_logits.ptr() +
                              (static_cast<std::size_t>(gi) * dense.grid_w + gj) * mask_n;
        Tensor<float> probs({1, mcfg.mask_out, mcfg.mask_out});
        for (int k = 0; k < mask_n; ++k) {
          probs.data[static_cast<std::size_t>(k)] = static_cast<float>(sigmoid(logits[k]));
        }
        const Tensor<float> up = nn::bilinear_upsample(probs, patch, patch);

        const double center_lx = (gj + 0.5) * 16.0;
        const double center_ly = (gi + 0.5) * 16.0;
        const double half_w = patch / 2.0 / level.sx;
        const double half_h = patch / 2.0 / level.sy;
        const double center_ox = center_lx / level.sx;
        const double center_oy = center_ly / level.sy;
        const int x_lo = std::max(0, static_cast<int>(std::floor(center_ox - half_w)));
        const int x_hi = std::min(orig_w - 1, static_cast<int>(std::ceil(center_ox + half_w)));
        const int y_lo = std::max(0, static_cast<int>(std::floor(center_oy - half_h)));
        const int y_hi = std::min(orig_h - 1, static_cast<int>(std::ceil(center_oy + half_h)));
        if (x_lo > x_hi || y_lo > y_hi) continue;

        BBox box{orig_w, orig_h, 0, 0};
        int max_x = -1, max_y = -1;
        bool any = false;
        for (int y = y_lo; y <= y_hi; ++y) {
          const double py = (y + 0.5) * level.sy - (center_ly - patch / 2.0);
          if (py < 0 || py >= patch) continue;
          std::uint8_t* row = bitmap.data() + static_cast<std::size_t>(y) * orig_w;
          for (int x = x_lo; x <= x_hi; ++x) {
            const double px = (x + 0.5) * level.sx - (center_lx - patch / 2.0);
            if (px < 0 || px >= patch) continue;
            // bilinear sample of the upsampled probability map at (px, py)
            const double gx = std::clamp(px - 0.5, 0.0, patch - 1.0);
            const double gy = std::clamp(py - 0.5, 0.0, patch - 1.0);
            const int x0 = std::min(static_cast<int>(gx), patch - 2);
            const int y0 = std::min(static_cast<int>(gy), patch - 2);
            const double tx = gx - x0, ty = gy - y0;
            const double v00 = up.at3(0, y0, x0);
            const double v01 = up.at3(0, y0, x0 + 1);
            const double v10 = up.at3(0, y0 + 1, x0);
            const double v11 = up.at3(0, y0 + 1, x0 + 1);
            const double top = v00 + (v01 - v00) * tx;
            const double value = top + ((v10 + (v11 - v10) * tx) - top) * ty;
            if (value > pcfg.mask_threshold) {
              row[x] = 1;
              any = true;
              box.x = std::min(box.x, x);
              box.y = std::min(box.y, y);
              max_x = std::max(max_x, x);
              max_y = std::max(max_y, y);
            }
          }
        }
        if (!any) continue;
        box.w = max_x - box.x + 1;
        box.h = max_y - box.y + 1;
        Proposal p;
        p.rle = rle_encode(bitmap.data(), bitmap.size());
        p.image_w = orig_w;
        p.image_h = orig_h;
        p.box = box;
        p.score = dense.score_logits.data[static_cast<std::size_t>(gi) * dense.grid_w + gj];
        p.scale = level.nominal_scale;
        p.cell_y = gi;
        p.cell_x = gj;
        proposals.push_back(std::move(p));
        // clear only the touched rows for the next cell
        for (int y = y_lo; y <= y_hi; ++y) {
          std::uint8_t* row = bitmap.data() + static_cast<std::size_t>(y) * orig_w;
          std::fill(row + x_lo, row + x_hi + 1, std::uint8_t(0));
        }
      }
    }
  }
  return proposals;
}

std::vector<Proposal> rank_proposals(std::vector<Proposal> proposals, std::size_t n) {
  std::stable_sort(proposals.begin(), proposals.end(), [](const Proposal& a, const Proposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scale != b.scale) return a.scale < b.scale;
    if (a.cell_y != b.cell_y) return a.cell_y < b.cell_y;
    return a.cell_x < b.cell_x;
  });
  if (proposals.size() > n) proposals.resize(n);
  return proposals;
}

BBox mask_to_box(const std::vector<std::uint8_t>& mask, int width, int height) {
  BBox box = bbox_of_mask(mask, width, height);
  if (box.w == 0 || box.h == 0) throw UsageError("mask_to_box: empty mask");
  return box;
}

std::vector<Proposal> propose(const ModelParams<float>& params, const ModelConfig& cfg,
                              const Tensor<float>& image, const PyramidConfig& pcfg) {
  BuiltPyramid pyramid = build_pyramid(image, pcfg, cfg.patch_size);
  std::vector<DenseOutput<float>> outputs;
  outputs.reserve(pyramid.levels.size());
  for (const PyramidLevel& level : pyramid.levels) {
    outputs.push_back(dense_apply(params, cfg, level.image));
  }
  std::vector<Proposal> proposals =
      extract_proposals(outputs, pyramid.levels, image.dim(2), image.dim(1), cfg, pcfg);
  return rank_proposals(std::move(proposals), static_cast<std::size_t>(pcfg.max_proposals));
}

void save_proposals(const std::vector<std::vector<Proposal>>& per_image, const std::string& path) {
  json doc = json::array();
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    for (const Proposal& p : per_image[i]) {
      json jp;
      jp["image_id"] = i;
      jp["score"] = p.score;
      jp["box"] = {p.box.x, p.box.y, p.box.w, p.box.h};
      jp["rle"] = p.rle;
      jp["scale"] = p.scale;
      jp["cell"] = {p.cell_y, p.cell_x};
      jp["width"] = p.image_w;
      jp["height"] = p.image_h;
      doc.push_back(std::move(jp));
    }
  }
  atomic_write_file(path, doc.dump());
}

std::vector<std::vector<Proposal>> load_proposals(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("proposal file parse error in " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw DataError("proposal file must be a JSON list: " + path);
  std::vector<std::vector<Proposal>> per_image;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& jp = doc[i];
    try {
      const std::size_t image_id = jp.at("image_id").get<std::size_t>();
      if (image_id >= per_image.size()) per_image.resize(image_id + 1);
      Proposal p;
      p.score = jp.at("score").get<double>();
      const auto& bb = jp.at("box");
      p.box = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
      p.rle = jp.at("rle").get<std::vector<std::int64_t>>();
      p.scale = jp.value("scale", 0.0);
      if (jp.contains("cell")) {
        p.cell_y = jp["cell"][0].get<int>();
        p.cell_x = jp["cell"][1].get<int>();
      }
      p.image_w = jp.at("width").get<int>();
      p.image_h = jp.at("height").get<int>();
      per_image[image_id].push_back(std::move(p));
    } catch (const json::exception& e) {
      throw DataError("proposal entry " + std::to_string(i) + " in " + path + ": " + e.what());
    }
  }
  return per_image;
}

}  // namespace maskseed
