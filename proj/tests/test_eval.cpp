#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maskseed/eval.hpp"

using namespace maskseed;

namespace {

std::vector<std::uint8_t> bits_from(const std::vector<int>& v) {
  std::vector<std::uint8_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<std::uint8_t>(v[i]);
  return out;
}

// scenes with rectangle instances plus proposals copied from the ground truth
Scene scene_with_rects(int size, const std::vector<BBox>& rects) {
  Scene s;
  s.image = Tensor<float>({3, size, size}, 0.3f);
  int id = 1;
  for (const BBox& r : rects) {
    InstanceAnnotation ann;
    ann.id = id++;
    ann.mask.assign(static_cast<std::size_t>(size) * size, 0);
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) ann.mask[static_cast<std::size_t>(y) * size + x] = 1;
    ann.bbox = r;
    ann.area = static_cast<long>(r.w) * r.h;
    s.annotations.push_back(std::move(ann));
  }
  return s;
}

Proposal proposal_from_mask(const std::vector<std::uint8_t>& mask, int w, int h, double score) {
  Proposal p;
  p.rle = rle_encode(mask.data(), mask.size());
  p.image_w = w;
  p.image_h = h;
  p.box = bbox_of_mask(mask, w, h);
  p.score = score;
  return p;
}

}  // namespace

TEST_CASE("mask IoU basics") {
  auto a = bits_from({1, 1, 0, 0});
  auto b = bits_from({1, 1, 0, 0});
  CHECK(iou_mask(a, b) == 1.0);

  auto c = bits_from({0, 0, 1, 1});
  CHECK(iou_mask(a, c) == 0.0);

  // union of 3 pixels, intersection of 1
  auto d = bits_from({1, 1, 0, 0});
  auto e = bits_from({0, 1, 1, 0});
  CHECK(iou_mask(d, e) == doctest::Approx(1.0 / 3.0));

  auto empty1 = bits_from({0, 0, 0, 0});
  auto empty2 = bits_from({0, 0, 0, 0});
  CHECK(iou_mask(empty1, empty2) == 0.0);

  CHECK_THROWS_AS(iou_mask(bits_from({1}), bits_from({1, 0})), UsageError);
}

TEST_CASE("mask IoU is symmetric and equals the RLE route") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(300);
    std::vector<std::uint8_t> a(n), b(n);
    for (auto& v : a) v = rng.bernoulli(0.4);
    for (auto& v : b) v = rng.bernoulli(0.4);
    const double ab = iou_mask(a, b);
    CHECK(ab == iou_mask(b, a));
    CHECK(ab == iou_rle(rle_encode(a.data(), n), rle_encode(b.data(), n)));
  }
}

TEST_CASE("box IoU basics") {
  FBox a{0, 0, 4, 4};
  CHECK(iou_box(a, a) == 1.0);
  FBox inner{1, 1, 2, 2};  // area 4 inside area 16
  CHECK(iou_box(a, inner) == doctest::Approx(0.25));
  FBox b{1, 1, 2, 2};
  FBox c{0, 0, 2, 2};
  CHECK(iou_box(c, b) == doctest::Approx(1.0 / 7.0));
  FBox apart{10, 10, 2, 2};
  CHECK(iou_box(a, apart) == 0.0);
  CHECK(iou_box(b, c) == iou_box(c, b));
  CHECK_THROWS_AS(iou_box({0, 0, -1, 2}, a), UsageError);
}

TEST_CASE("greedy matching: identical pair, one-to-one exclusivity") {
  MatchResult r = match_greedy({{1.0}}, 1);
  CHECK(r.gt_best_iou[0] == 1.0);
  CHECK(r.gt_proposal[0] == 0);

  // one proposal overlapping two gts: consumed by the higher-IoU gt
  MatchResult r2 = match_greedy({{0.6, 0.8}}, 2);
  CHECK(r2.gt_best_iou[0] == 0.0);
  CHECK(r2.gt_best_iou[1] == 0.8);
  CHECK(r2.gt_proposal[0] == -1);
}

TEST_CASE("greedy matching agrees with an independent reimplementation") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_props = rng.uniform_int(0, 5);
    const int n_gts = rng.uniform_int(0, 4);
    std::vector<std::vector<double>> m(static_cast<std::size_t>(n_props));
    for (auto& row : m) {
      row.resize(static_cast<std::size_t>(n_gts));
      for (auto& v : row) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform();
    }
    MatchResult got = match_greedy(m, static_cast<std::size_t>(n_gts));

    // repeated argmax scan with the same tie-break (lower prop, lower gt)
    std::vector<bool> pu(static_cast<std::size_t>(n_props), false);
    std::vector<bool> gu(static_cast<std::size_t>(n_gts), false);
    std::vector<double> want(static_cast<std::size_t>(n_gts), 0.0);
    while (true) {
      double best = 0.0;
      int bp = -1, bg = -1;
      for (int p = 0; p < n_props; ++p) {
        if (pu[static_cast<std::size_t>(p)]) continue;
        for (int g = 0; g < n_gts; ++g) {
          if (gu[static_cast<std::size_t>(g)]) continue;
          if (m[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)] > best) {
            best = m[static_cast<std::size_t>(p)][static_cast<std::size_t>(g)];
            bp = p;
            bg = g;
          }
        }
      }
      if (bp < 0) break;
      pu[static_cast<std::size_t>(bp)] = true;
      gu[static_cast<std::size_t>(bg)] = true;
      want[static_cast<std::size_t>(bg)] = best;
    }
    REQUIRE(got.gt_best_iou.size() == want.size());
    for (std::size_t g = 0; g < want.size(); ++g) CHECK(got.gt_best_iou[g] == want[g]);
  }
}

TEST_CASE("average recall closed-form cases") {
  CHECK(average_recall({1.0, 1.0, 1.0}).value() == 1.0);
  CHECK(average_recall({0.4, 0.4}).value() == 0.0);
  // 0.72 clears thresholds .50-.70 (5 of 10)
  CHECK(average_recall({0.72}).value() == doctest::Approx(0.5));
  CHECK_FALSE(average_recall({}).has_value());
}

TEST_CASE("recall-vs-IoU curves") {
  auto curve = recall_vs_iou({1.0, 1.0}, ar_iou_thresholds());
  for (double v : curve) CHECK(v == 1.0);
  auto zero = recall_vs_iou({}, ar_iou_thresholds());
  for (double v : zero) CHECK(v == 0.0);

  Rng rng(3);
  std::vector<double> ious;
  for (int i = 0; i < 16; ++i) ious.push_back(rng.uniform());
  auto c = recall_vs_iou(ious, ar_iou_thresholds());
  for (std::size_t t = 0; t < c.size(); ++t) {
    long hit = 0;
    for (double v : ious) hit += v >= ar_iou_thresholds()[t];
    CHECK(c[t] == doctest::Approx(static_cast<double>(hit) / ious.size()));
    if (t > 0) CHECK(c[t] <= c[t - 1]);  // monotone non-increasing
  }
  CHECK_THROWS_AS(recall_vs_iou({0.5}, {0.9, 0.5}), UsageError);
}

TEST_CASE("scale buckets use the exact pixel-area cutoffs") {
  CHECK(scale_bucket(1023) == ScaleBucket::Small);
  CHECK(scale_bucket(1024) == ScaleBucket::Medium);
  CHECK(scale_bucket(9216) == ScaleBucket::Medium);
  CHECK(scale_bucket(9217) == ScaleBucket::Large);
}

TEST_CASE("ground truth fed as proposals scores AR = 1.0") {
  std::vector<Scene> scenes;
  scenes.push_back(scene_with_rects(64, {{4, 4, 10, 12}, {30, 30, 20, 16}}));
  scenes.push_back(scene_with_rects(64, {{8, 20, 24, 24}}));
  std::vector<std::vector<Proposal>> proposals(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const auto& ann : scenes[i].annotations) {
      proposals[i].push_back(proposal_from_mask(ann.mask, 64, 64, 1.0));
    }
  }
  EvalReport report = evaluate(proposals, scenes);
  for (const auto& [budget, ar] : report.ar_at) {
    if (budget >= 2) CHECK(ar == 1.0);
  }
  CHECK(report.gt_count == 3);
}

TEST_CASE("AR is monotone non-decreasing in the proposal budget") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Scene> scenes;
    scenes.push_back(scene_with_rects(
        48, {{static_cast<int>(rng.uniform_below(20)), static_cast<int>(rng.uniform_below(20)),
              8 + static_cast<int>(rng.uniform_below(12)),
              8 + static_cast<int>(rng.uniform_below(12))},
             {20, 24, 12, 10}}));
    std::vector<std::vector<Proposal>> proposals(1);
    const int n = rng.uniform_int(1, 12);
    for (int i = 0; i < n; ++i) {
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(48) * 48, 0);
      const int x = static_cast<int>(rng.uniform_below(30));
      const int y = static_cast<int>(rng.uniform_below(30));
      const int w = 6 + static_cast<int>(rng.uniform_below(14));
      const int h = 6 + static_cast<int>(rng.uniform_below(14));
      for (int yy = y; yy < std::min(48, y + h); ++yy)
        for (int xx = x; xx < std::min(48, x + w); ++xx)
          mask[static_cast<std::size_t>(yy) * 48 + xx] = 1;
      proposals[0].push_back(proposal_from_mask(mask, 48, 48, 1.0 - 0.05 * i));
    }
    EvalReport report = evaluate(proposals, scenes);
    for (std::size_t i = 1; i < report.ar_curve.size(); ++i) {
      CHECK(report.ar_curve[i] >= report.ar_curve[i - 1] - 1e-12);
    }
  }
}

TEST_CASE("AUC is the mean of the AR curve over the budget grid") {
  std::vector<Scene> scenes = {scene_with_rects(64, {{10, 10, 16, 16}})};
  std::vector<std::vector<Proposal>> proposals(1);
  proposals[0].push_back(proposal_from_mask(scenes[0].annotations[0].mask, 64, 64, 0.9));
  EvalReport report = evaluate(proposals, scenes);
  double mean = 0;
  for (double v : report.ar_curve) mean += v;
  mean /= static_cast<double>(report.ar_curve.size());
  CHECK(report.auc == doctest::Approx(mean).epsilon(1e-12));
  // a perfect single proposal: AR 1 at every budget, so AUC 1
  CHECK(report.auc == doctest::Approx(1.0));
}

TEST_CASE("metrics are independent of gt ordering") {
  Scene a = scene_with_rects(64, {{4, 4, 10, 12}, {30, 30, 20, 16}});
  Scene b = scene_with_rects(64, {{30, 30, 20, 16}, {4, 4, 10, 12}});
  std::vector<std::vector<Proposal>> proposals(1);
  std::vector<std::uint8_t> near(static_cast<std::size_t>(64) * 64, 0);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 13; ++x) near[static_cast<std::size_t>(y) * 64 + x] = 1;
  proposals[0].push_back(proposal_from_mask(near, 64, 64, 0.8));
  EvalReport ra = evaluate(proposals, {a});
  EvalReport rb = evaluate(proposals, {b});
  CHECK(ra.auc == rb.auc);
  CHECK(ra.ar_at == rb.ar_at);
}

TEST_CASE("proposals naming unknown image ids are a data error") {
  std::vector<Scene> scenes = {scene_with_rects(64, {{10, 10, 16, 16}})};
  std::vector<std::vector<Proposal>> proposals(3);
  proposals[2].push_back(proposal_from_mask(scenes[0].annotations[0].mask, 64, 64, 1.0));
  CHECK_THROWS_WITH_AS(evaluate(proposals, scenes), doctest::Contains("2"), DataError);
}

TEST_CASE("empty proposal set scores zero AR at every budget") {
  std::vector<Scene> scenes = {scene_with_rects(64, {{10, 10, 16, 16}})};
  EvalReport report = evaluate({}, scenes);
  for (const auto& [budget, ar] : report.ar_at) CHECK(ar == 0.0);
  CHECK(report.auc == 0.0);
}
