#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maskseed/inference.hpp"

using namespace maskseed;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.patch_size = 32;
  cfg.trunk = "C4,P,C6,P,C8,P,C8,P";
  cfg.rank = 12;
  cfg.mask_out = 8;
  cfg.score_hidden1 = 10;
  cfg.score_hidden2 = 12;
  cfg.dropout_rate = 0.5;
  return cfg;
}

template <class T>
Tensor<T> random_image(int h, int w, Rng& rng) {
  Tensor<T> img({3, h, w});
  for (auto& v : img.data) v = static_cast<T>(rng.uniform());
  return img;
}

template <class T>
double max_abs_diff(const DenseOutput<T>& a, const DenseOutput<T>& b) {
  REQUIRE(a.mask_logits.shape == b.mask_logits.shape);
  REQUIRE(a.score_logits.shape == b.score_logits.shape);
  double worst = 0;
  for (std::size_t i = 0; i < a.mask_logits.numel(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(a.mask_logits.data[i]) -
                                      static_cast<double>(b.mask_logits.data[i])));
  }
  for (std::size_t i = 0; i < a.score_logits.numel(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(a.score_logits.data[i]) -
                                      static_cast<double>(b.score_logits.data[i])));
  }
  return worst;
}

}  // namespace

TEST_CASE("default pyramid has 7 scales, 8 with zoom") {
  CHECK(default_pyramid_scales(false).size() == 7);
  CHECK(default_pyramid_scales(true).size() == 8);
  auto scales = default_pyramid_scales(true);
  for (std::size_t i = 1; i < scales.size(); ++i) CHECK(scales[i] > scales[i - 1]);
  CHECK(scales.front() == doctest::Approx(std::exp2(-2.5)));
  CHECK(scales.back() == doctest::Approx(2.0));
}

TEST_CASE("scale 1.0 on a multiple-of-32 image is an identity level") {
  Rng rng(1);
  Tensor<float> img = random_image<float>(96, 64, rng);
  PyramidConfig cfg;
  cfg.scales = {1.0};
  BuiltPyramid p = build_pyramid(img, cfg, 32);
  REQUIRE(p.levels.size() == 1);
  CHECK(p.levels[0].image.data == img.data);
  CHECK(p.levels[0].sx == 1.0);
  CHECK(p.levels[0].sy == 1.0);
}

TEST_CASE("levels smaller than one patch are skipped with a notice") {
  Rng rng(2);
  Tensor<float> img = random_image<float>(96, 96, rng);
  PyramidConfig cfg;
  cfg.scales = {0.25, 1.0};
  BuiltPyramid p = build_pyramid(img, cfg, 64);
  CHECK(p.levels.size() == 1);
  REQUIRE(p.notices.size() == 1);
  CHECK(p.notices[0].find("skipped") != std::string::npos);
}

TEST_CASE("constant image produces constant levels") {
  Tensor<float> img({3, 64, 64}, 0.35f);
  PyramidConfig cfg;
  BuiltPyramid p = build_pyramid(img, cfg, 32);
  REQUIRE(!p.levels.empty());
  for (const auto& level : p.levels) {
    for (float v : level.image.data) CHECK(v == doctest::Approx(0.35f).epsilon(1e-6));
  }
}

TEST_CASE("grid geometry round-trips cell -> level coords -> cell") {
  // cell centers sit at (g + 0.5)·stride in level pixels
  for (int grid : {2, 5, 9}) {
    for (int g = 0; g < grid; ++g) {
      const double center = (g + 0.5) * 16.0;
      const int back = static_cast<int>(center / 16.0 - 0.5 + 1e-9);
      CHECK(back == g);
    }
  }
}

TEST_CASE("dense_apply grid dims are exactly level/16 and score grid matches mask grid") {
  const ModelConfig cfg = tiny_config();
  Rng rng(3);
  ModelParams<float> params = build_model<float>(cfg, rng);
  Tensor<float> level = random_image<float>(64, 96, rng);
  DenseOutput<float> out = dense_apply(params, cfg, level);
  CHECK(out.grid_h == 4);
  CHECK(out.grid_w == 6);
  CHECK(out.score_logits.shape == std::vector<int>{4, 6});
  CHECK(out.mask_logits.shape == std::vector<int>{4, 6, 8, 8});
}

TEST_CASE("dense_apply equals the patchwise oracle (f32, several seeds and sizes)") {
  const ModelConfig cfg = tiny_config();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Rng rng(seed + 10);
    ModelParams<float> params = build_model<float>(cfg, rng);
    for (auto [h, w] : {std::pair{32, 32}, {64, 96}, {96, 64}}) {
      Tensor<float> level = random_image<float>(h, w, rng);
      DenseOutput<float> dense = dense_apply(params, cfg, level);
      DenseOutput<float> oracle = patchwise_oracle(params, cfg, level);
      CHECK(max_abs_diff(dense, oracle) <= 1e-4);
    }
  }
}

TEST_CASE("dense_apply equals the patchwise oracle (f64, 1e-8)") {
  const ModelConfig cfg = tiny_config();
  Rng rng(20);
  ModelParams<double> params = build_model<double>(cfg, rng);
  Tensor<double> level = random_image<double>(64, 64, rng);
  DenseOutput<double> dense = dense_apply(params, cfg, level);
  DenseOutput<double> oracle = patchwise_oracle(params, cfg, level);
  CHECK(max_abs_diff(dense, oracle) <= 1e-8);
}

TEST_CASE("one-patch level: dense output equals the oracle's patch call bitwise") {
  const ModelConfig cfg = tiny_config();
  Rng rng(4);
  ModelParams<double> params = build_model<double>(cfg, rng);
  Tensor<double> level = random_image<double>(32, 32, rng);
  DenseOutput<double> dense = dense_apply(params, cfg, level);
  DenseOutput<double> oracle = patchwise_oracle(params, cfg, level);
  CHECK(dense.grid_h == 2);
  CHECK(dense.grid_w == 2);
  CHECK(dense.mask_logits.data == oracle.mask_logits.data);
  CHECK(dense.score_logits.data == oracle.score_logits.data);
}

TEST_CASE("interleaved score cells equal shifted explicit evaluations exactly (f64)") {
  const ModelConfig cfg = tiny_config();
  Rng rng(5);
  ModelParams<double> params = build_model<double>(cfg, rng);
  Tensor<double> level = random_image<double>(64, 96, rng);

  PaddedLevel<double> padded = pad_level_for_dense(cfg, level);
  Tensor<double> features = trunk_forward(params, cfg, padded.image);
  const int grid_h = 64 / 16, grid_w = 96 / 16;
  Tensor<double> grid =
      interleave_scores(params, cfg, features, padded.margin_cells, grid_h, grid_w);
  CHECK(grid.shape == std::vector<int>{grid_h, grid_w});

  // shifted explicit evaluation: plain scoring head on each cell's window
  const int wc = cfg.trunk_cells();
  Rng no_dropout(0);
  for (int gi = 0; gi < grid_h; ++gi) {
    for (int gj = 0; gj < grid_w; ++gj) {
      Tensor<double> window({cfg.trunk_channels(), wc, wc});
      for (int c = 0; c < cfg.trunk_channels(); ++c)
        for (int y = 0; y < wc; ++y)
          for (int x = 0; x < wc; ++x)
            window.at3(c, y, x) =
                features.at3(c, gi + padded.margin_cells + y, gj + padded.margin_cells + x);
      const double want = score_head_forward(params, cfg, window, false, no_dropout);
      CHECK(grid.data[static_cast<std::size_t>(gi) * grid_w + gj] == want);
    }
  }
}

TEST_CASE("constant level gives identical values at every grid cell") {
  const ModelConfig cfg = tiny_config();
  Rng rng(6);
  ModelParams<float> params = build_model<float>(cfg, rng);
  Tensor<float> level({3, 64, 64}, 0.4f);
  DenseOutput<float> out = dense_apply(params, cfg, level);
  const int mask_n = cfg.mask_out * cfg.mask_out;
  for (int gi = 0; gi < out.grid_h; ++gi) {
    for (int gj = 0; gj < out.grid_w; ++gj) {
      CHECK(out.score_logits.data[static_cast<std::size_t>(gi) * out.grid_w + gj] ==
            out.score_logits.data[0]);
      const float* cell =
          out.mask_logits.ptr() + (static_cast<std::size_t>(gi) * out.grid_w + gj) * mask_n;
      for (int k = 0; k < mask_n; ++k) CHECK(cell[k] == out.mask_logits.data[k]);
    }
  }
}

TEST_CASE("strongly negative mask logits yield zero proposals") {
  const ModelConfig cfg = tiny_config();
  PyramidConfig pcfg;
  pcfg.scales = {1.0};
  PyramidLevel level;
  level.image = Tensor<float>({3, 64, 64});
  DenseOutput<float> out;
  out.grid_h = 4;
  out.grid_w = 4;
  out.mask_h = cfg.mask_out;
  out.mask_w = cfg.mask_out;
  out.mask_logits = Tensor<float>({4, 4, 8, 8}, -50.0f);
  out.score_logits = Tensor<float>({4, 4}, 1.0f);
  auto proposals = extract_proposals({out}, {level}, 64, 64, cfg, pcfg);
  CHECK(proposals.empty());
}

TEST_CASE("pasted masks stay inside the original image at border cells") {
  const ModelConfig cfg = tiny_config();
  Rng rng(7);
  ModelParams<float> params = build_model<float>(cfg, rng);
  Tensor<float> image = random_image<float>(64, 64, rng);
  PyramidConfig pcfg;
  pcfg.scales = {1.0, 2.0};
  pcfg.mask_threshold = 0.2;
  pcfg.max_proposals = 10000;
  BuiltPyramid pyramid = build_pyramid(image, pcfg, cfg.patch_size);
  std::vector<DenseOutput<float>> outs;
  for (const auto& level : pyramid.levels) outs.push_back(dense_apply(params, cfg, level.image));
  auto proposals = extract_proposals(outs, pyramid.levels, 64, 64, cfg, pcfg);
  for (const auto& p : proposals) {
    auto mask = rle_decode(p.rle, static_cast<std::size_t>(64) * 64);
    const BBox box = bbox_of_mask(mask, 64, 64);
    CHECK(box.x >= 0);
    CHECK(box.y >= 0);
    CHECK(box.x + box.w <= 64);
    CHECK(box.y + box.h <= 64);
    CHECK(box.x == p.box.x);
    CHECK(box.y == p.box.y);
    CHECK(box.w == p.box.w);
    CHECK(box.h == p.box.h);
  }
}

TEST_CASE("rank_proposals sorts by score with deterministic tie-breaks") {
  auto make = [](double score, double scale, int gi, int gj) {
    Proposal p;
    p.score = score;
    p.scale = scale;
    p.cell_y = gi;
    p.cell_x = gj;
    return p;
  };
  std::vector<Proposal> props = {make(0.5, 1.0, 3, 1), make(0.9, 0.5, 0, 0),
                                 make(0.5, 0.5, 2, 2), make(0.5, 0.5, 2, 1)};
  auto ranked = rank_proposals(props, 10);
  REQUIRE(ranked.size() == 4);
  CHECK(ranked[0].score == 0.9);
  CHECK(ranked[1].scale == 0.5);
  CHECK(ranked[1].cell_x == 1);
  CHECK(ranked[2].cell_x == 2);
  CHECK(ranked[3].scale == 1.0);
  for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].score >= ranked[i].score);

  CHECK(rank_proposals(props, 0).empty());
  CHECK(rank_proposals(props, 2).size() == 2);
}

TEST_CASE("mask_to_box matches a naive scan and rejects empty masks") {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(8) * 8, 0);
  mask[3 * 8 + 5] = 1;
  BBox b = mask_to_box(mask, 8, 8);
  CHECK(b.x == 5);
  CHECK(b.y == 3);
  CHECK(b.w == 1);
  CHECK(b.h == 1);

  std::vector<std::uint8_t> full(static_cast<std::size_t>(8) * 8, 1);
  BBox fb = mask_to_box(full, 8, 8);
  CHECK(fb.x == 0);
  CHECK(fb.y == 0);
  CHECK(fb.w == 8);
  CHECK(fb.h == 8);

  std::vector<std::uint8_t> empty(64, 0);
  CHECK_THROWS_AS(mask_to_box(empty, 8, 8), UsageError);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(12) * 10, 0);
    bool any = false;
    for (auto& v : m) {
      v = rng.bernoulli(0.2);
      any = any || v;
    }
    if (!any) continue;
    const BBox got = mask_to_box(m, 10, 12);
    int x0 = 10, y0 = 12, x1 = -1, y1 = -1;
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 10; ++x)
        if (m[static_cast<std::size_t>(y) * 10 + x]) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x);
          y1 = std::max(y1, y);
        }
    CHECK(got.x == x0);
    CHECK(got.y == y0);
    CHECK(got.w == x1 - x0 + 1);
    CHECK(got.h == y1 - y0 + 1);
  }
}

TEST_CASE("propose is deterministic including ordering") {
  const ModelConfig cfg = tiny_config();
  Rng rng(9);
  ModelParams<float> params = build_model<float>(cfg, rng);
  Tensor<float> image = random_image<float>(64, 64, rng);
  PyramidConfig pcfg;
  pcfg.scales = {0.5, 1.0};
  auto a = propose(params, cfg, image, pcfg);
  auto b = propose(params, cfg, image, pcfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].score == b[i].score);
    CHECK(a[i].scale == b[i].scale);
    CHECK(a[i].cell_y == b[i].cell_y);
    CHECK(a[i].cell_x == b[i].cell_x);
    CHECK(a[i].rle == b[i].rle);
  }
}
