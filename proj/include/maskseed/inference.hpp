#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "maskseed/model.hpp"
#include "maskseed/sampler.hpp"
#include "maskseed/tensor.hpp"

namespace maskseed {

// ------------------------------------------------------------- pyramid

struct PyramidConfig {
  std::vector<double> scales;  // strictly increasing; filled with defaults when empty
  int stride = 16;
  bool zoom = false;           // adds one extra smaller scale
  double mask_threshold = 0.2;
  int max_proposals = 1000;
};

// 2^-2 .. 2^1 in steps of 2^1/2; zoom prepends 2^-5/2.
std::vector<double> default_pyramid_scales(bool zoom);

struct PyramidLevel {
  Tensor<float> image;
  double nominal_scale = 1.0;
  double sx = 1.0, sy = 1.0;  // effective level/original ratios after rounding
};

struct BuiltPyramid {
  std::vector<PyramidLevel> levels;
  std::vector<std::string> notices;  // skipped levels etc.
};

// Levels are bilinear-resampled and rounded to the nearest multiple of 32;
// levels smaller than one patch are skipped with a notice.
BuiltPyramid build_pyramid(const Tensor<float>& image, const PyramidConfig& cfg, int patch_size);

// ------------------------------------------------------------- dense application

template <class T>
struct DenseOutput {
  int grid_h = 0, grid_w = 0;
  int mask_h = 0, mask_w = 0;
  Tensor<T> mask_logits;   // grid_h × grid_w × mask_h × mask_w
  Tensor<T> score_logits;  // grid_h × grid_w
};

// Trunk receptive-field halo, in 16-px feature cells. Dense levels are padded
// by this much beyond the patch overhang so that every feature cell a grid
// window reads is independent of the padded level's borders; the patchwise
// oracle crops patches with the same halo and reproduces those cells exactly.
int trunk_margin_cells(const ModelConfig& cfg);

template <class T>
struct PaddedLevel {
  Tensor<T> image;
  int margin_cells = 0;
  int pad_before = 0;  // pixels added on top/left
};

template <class T>
PaddedLevel<T> pad_level_for_dense(const ModelConfig& cfg, const Tensor<T>& level) {
  if (level.dim(1) % 32 != 0 || level.dim(2) % 32 != 0) {
    throw UsageError("dense inference: level dims must be multiples of 32, got " +
                     shape_str(level.shape));
  }
  PaddedLevel<T> out;
  out.margin_cells = trunk_margin_cells(cfg);
  const int margin_px = out.margin_cells * 16;
  out.pad_before = (cfg.patch_size - 16) / 2 + margin_px;
  const int pad_after = cfg.patch_size - 16 - (cfg.patch_size - 16) / 2 + margin_px;
  const int h = level.dim(1), w = level.dim(2);
  double mean[3];
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    const T* plane = level.ptr() + static_cast<std::size_t>(c) * h * w;
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) s += plane[i];
    mean[c] = s / (static_cast<double>(h) * w);
  }
  out.image = Tensor<T>({3, h + out.pad_before + pad_after, w + out.pad_before + pad_after});
  for (int c = 0; c < 3; ++c) {
    const T m = static_cast<T>(mean[c]);
    T* plane = out.image.ptr() + static_cast<std::size_t>(c) * out.image.dim(1) * out.image.dim(2);
    std::fill(plane, plane + static_cast<std::size_t>(out.image.dim(1)) * out.image.dim(2), m);
    for (int y = 0; y < h; ++y) {
      const T* src = level.ptr() + (static_cast<std::size_t>(c) * h + y) * w;
      T* dst = plane + static_cast<std::size_t>(y + out.pad_before) * out.image.dim(2) + out.pad_before;
      std::copy(src, src + w, dst);
    }
  }
  return out;
}

// Scoring branch evaluated densely: the 2×2 pool is run at all four offsets of
// the feature map, the head applied convolutionally to each pooled map, and
// the four results interleaved into one grid matching the mask grid's
// resolution. grid[gi][gj] uses the pooled map whose offset equals the parity
// of the cell's feature-window origin.
template <class T>
Tensor<T> interleave_scores(const ModelParams<T>& params, const ModelConfig& cfg,
                            const Tensor<T>& features, int margin_cells, int grid_h, int grid_w) {
  const int c = features.dim(0), fh = features.dim(1), fw = features.dim(2);
  const int wc = cfg.trunk_cells();
  const int half = wc / 2;

  // fc1 reshaped as a half×half convolution over pooled features
  nn::LayerParams<T> fc1_conv;
  fc1_conv.weights = params.score_fc1.weights;
  fc1_conv.weights.shape = {cfg.score_hidden1, c, half, half};
  fc1_conv.bias = params.score_fc1.bias;
  nn::LayerParams<T> fc2_conv;
  fc2_conv.weights = params.score_fc2.weights;
  fc2_conv.weights.shape = {cfg.score_hidden2, cfg.score_hidden1, 1, 1};
  fc2_conv.bias = params.score_fc2.bias;
  nn::LayerParams<T> out_conv;
  out_conv.weights = params.score_out.weights;
  out_conv.weights.shape = {1, cfg.score_hidden2, 1, 1};
  out_conv.bias = params.score_out.bias;

  Tensor<T> offset_scores[2][2];
  for (int oy = 0; oy < 2; ++oy) {
    for (int ox = 0; ox < 2; ++ox) {
      const int ph = (fh - oy) / 2, pw = (fw - ox) / 2;
      if (ph < half || pw < half) throw ConfigError("interleave: feature map too small");
      Tensor<T> pooled({c, ph, pw});
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < ph; ++y) {
          for (int x = 0; x < pw; ++x) {
            const int sy = oy + 2 * y, sx = ox + 2 * x;
            const T a = features.at3(ch, sy, sx);
            const T b = features.at3(ch, sy, sx + 1);
            const T d = features.at3(ch, sy + 1, sx);
            const T e = features.at3(ch, sy + 1, sx + 1);
            T m = a;
            if (b > m) m = b;
            if (d > m) m = d;
            if (e > m) m = e;
            pooled.at3(ch, y, x) = m;
          }
        }
      }
      Tensor<T> h1 = nn::relu(nn::conv2d(pooled, fc1_conv, 1, 0));
      Tensor<T> h2 = nn::relu(nn::conv2d(h1, fc2_conv, 1, 0));
      offset_scores[oy][ox] = nn::conv2d(h2, out_conv, 1, 0);
    }
  }

  Tensor<T> grid({grid_h, grid_w});
  for (int gi = 0; gi < grid_h; ++gi) {
    const int ay = gi + margin_cells;
    for (int gj = 0; gj < grid_w; ++gj) {
      const int ax = gj + margin_cells;
      grid.data[static_cast<std::size_t>(gi) * grid_w + gj] =
          offset_scores[ay % 2][ax % 2].at3(0, ay / 2, ax / 2);
    }
  }
  return grid;
}

// Whole-level evaluation: trunk once, both heads as convolutions over the
// shared feature map. Grid dims are exactly level/16. Dropout is off.
template <class T>
DenseOutput<T> dense_apply(const ModelParams<T>& params, const ModelConfig& cfg,
                           const Tensor<T>& level) {
  cfg.validate();
  DenseOutput<T> out;
  out.grid_h = level.dim(1) / 16;
  out.grid_w = level.dim(2) / 16;
  out.mask_h = cfg.mask_out;
  out.mask_w = cfg.mask_out;

  PaddedLevel<T> padded = pad_level_for_dense(cfg, level);
  const int mc = padded.margin_cells;
  const int wc = cfg.trunk_cells();
  Tensor<T> features = trunk_forward(params, cfg, padded.image);

  // mask branch: 1×1 conv + ReLU, then the two linear maps as convolutions
  Tensor<T> act = nn::relu(nn::conv2d(features, params.seg_conv1x1, 1, 0));
  nn::LayerParams<T> reduce_conv;
  reduce_conv.weights = params.seg_reduce.weights;
  reduce_conv.weights.shape = {params.seg_reduce.weights.dim(0), cfg.trunk_channels(), wc, wc};
  reduce_conv.bias = params.seg_reduce.bias;
  Tensor<T> mask_map = nn::conv2d(act, reduce_conv, 1, 0);
  if (!cfg.full_rank) {
    nn::LayerParams<T> expand_conv;
    expand_conv.weights = params.seg_expand.weights;
    expand_conv.weights.shape = {params.seg_expand.weights.dim(0), cfg.rank, 1, 1};
    expand_conv.bias = params.seg_expand.bias;
    mask_map = nn::conv2d(mask_map, expand_conv, 1, 0);
  }

  const int mask_n = cfg.mask_out * cfg.mask_out;
  out.mask_logits = Tensor<T>({out.grid_h, out.grid_w, cfg.mask_out, cfg.mask_out});
  for (int gi = 0; gi < out.grid_h; ++gi) {
    for (int gj = 0; gj < out.grid_w; ++gj) {
      T* dst = out.mask_logits.ptr() +
               (static_cast<std::size_t>(gi) * out.grid_w + gj) * mask_n;
      for (int k = 0; k < mask_n; ++k) dst[k] = mask_map.at3(k, gi + mc, gj + mc);
    }
  }

  out.score_logits = interleave_scores(params, cfg, features, mc, out.grid_h, out.grid_w);
  return out;
}

// Reference route: crops every stride-aligned patch (with the trunk halo) from
// the same padded level and runs the plain per-patch model. Semantically
// identical to dense_apply; used only in tests and selftest.
template <class T>
DenseOutput<T> patchwise_oracle(const ModelParams<T>& params, const ModelConfig& cfg,
                                const Tensor<T>& level) {
  cfg.validate();
  DenseOutput<T> out;
  out.grid_h = level.dim(1) / 16;
  out.grid_w = level.dim(2) / 16;
  out.mask_h = cfg.mask_out;
  out.mask_w = cfg.mask_out;
  const int mask_n = cfg.mask_out * cfg.mask_out;
  out.mask_logits = Tensor<T>({out.grid_h, out.grid_w, cfg.mask_out, cfg.mask_out});
  out.score_logits = Tensor<T>({out.grid_h, out.grid_w});

  PaddedLevel<T> padded = pad_level_for_dense(cfg, level);
  const int mc = padded.margin_cells;
  const int wc = cfg.trunk_cells();
  const int crop_side = cfg.patch_size + 2 * mc * 16;
  const int ph = padded.image.dim(1), pw = padded.image.dim(2);
  Rng no_dropout(0);

  for (int gi = 0; gi < out.grid_h; ++gi) {
    for (int gj = 0; gj < out.grid_w; ++gj) {
      Tensor<T> crop({3, crop_side, crop_side});
      const int y0 = gi * 16, x0 = gj * 16;
      if (y0 + crop_side > ph || x0 + crop_side > pw) {
        throw UsageError("patchwise_oracle: crop exceeds padded level");
      }
      for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < crop_side; ++y) {
          const T* src = padded.image.ptr() +
                         (static_cast<std::size_t>(c) * ph + (y0 + y)) * pw + x0;
          T* dst = crop.ptr() + (static_cast<std::size_t>(c) * crop_side + y) * crop_side;
          std::copy(src, src + crop_side, dst);
        }
      }
      Tensor<T> crop_features = trunk_forward(params, cfg, crop);
      Tensor<T> window({cfg.trunk_channels(), wc, wc});
      for (int c = 0; c < cfg.trunk_channels(); ++c) {
        for (int y = 0; y < wc; ++y) {
          for (int x = 0; x < wc; ++x) {
            window.at3(c, y, x) = crop_features.at3(c, mc + y, mc + x);
          }
        }
      }
      Tensor<T> logits = seg_head_forward(params, cfg, window);
      T* dst = out.mask_logits.ptr() +
               (static_cast<std::size_t>(gi) * out.grid_w + gj) * mask_n;
      for (int k = 0; k < mask_n; ++k) dst[k] = logits.data[static_cast<std::size_t>(k)];
      out.score_logits.data[static_cast<std::size_t>(gi) * out.grid_w + gj] =
          score_head_forward(params, cfg, window, false, no_dropout);
    }
  }
  return out;
}

// ------------------------------------------------------------- proposals

struct Proposal {
  std::vector<std::int64_t> rle;  // full-image mask, row-major
  int image_w = 0, image_h = 0;
  BBox box;
  double score = 0;
  double scale = 0;  // nominal pyramid scale
  int cell_y = 0, cell_x = 0;
};

// Sigmoid → bilinear upsample to the patch footprint → paste into original
// coordinates → binarize. Cells whose thresholded mask is empty are dropped.
std::vector<Proposal> extract_proposals(const std::vector<DenseOutput<float>>& outputs,
                                        const std::vector<PyramidLevel>& levels, int orig_w,
                                        int orig_h, const ModelConfig& mcfg,
                                        const PyramidConfig& pcfg);

// Descending score; ties broken by (scale, cell_y, cell_x).
std::vector<Proposal> rank_proposals(std::vector<Proposal> proposals, std::size_t n);

BBox mask_to_box(const std::vector<std::uint8_t>& mask, int width, int height);

// Full per-image pipeline: pyramid → dense apply per level → proposals →
// ranking, truncated at max_proposals.
std::vector<Proposal> propose(const ModelParams<float>& params, const ModelConfig& cfg,
                              const Tensor<float>& image, const PyramidConfig& pcfg);

// Proposal file: JSON list of {image_id, score, box, rle, scale, cell},
// ordered by rank within each image.
void save_proposals(const std::vector<std::vector<Proposal>>& per_image, const std::string& path);
std::vector<std::vector<Proposal>> load_proposals(const std::string& path);

}  // namespace maskseed
