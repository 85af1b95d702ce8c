#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maskseed/sampler.hpp"

using namespace maskseed;

namespace {

// solid axis-aligned rectangle scene built by hand; exact geometry for the
// extraction tests
Scene rect_scene(int size, std::vector<BBox> rects) {
  Scene s;
  s.image = Tensor<float>({3, size, size}, 0.2f);
  int id = 1;
  for (const BBox& r : rects) {
    InstanceAnnotation ann;
    ann.id = id;
    ann.category_id = 1;
    ann.mask.assign(static_cast<std::size_t>(size) * size, 0);
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) {
        ann.mask[static_cast<std::size_t>(y) * size + x] = 1;
        const float v = 0.2f + 0.15f * id;
        s.image.at3(0, y, x) = v;
        s.image.at3(1, y, x) = 1.0f - v;
        s.image.at3(2, y, x) = v * 0.5f;
      }
    ann.bbox = r;
    ann.area = static_cast<long>(r.w) * r.h;
    s.annotations.push_back(std::move(ann));
    ++id;
  }
  // later rects occlude earlier ones
  for (std::size_t i = 0; i + 1 < s.annotations.size(); ++i) {
    for (std::size_t j = i + 1; j < s.annotations.size(); ++j) {
      for (std::size_t p = 0; p < s.annotations[i].mask.size(); ++p) {
        if (s.annotations[j].mask[p]) s.annotations[i].mask[p] = 0;
      }
    }
    s.annotations[i].bbox = bbox_of_mask(s.annotations[i].mask, size, size);
    long a = 0;
    for (auto v : s.annotations[i].mask) a += v;
    s.annotations[i].area = a;
  }
  return s;
}

SamplerConfig default_sampler() {
  SamplerConfig cfg;
  cfg.canonical_max_dim = 32;
  return cfg;
}

}  // namespace

TEST_CASE("generate_scene with zero shapes is background only") {
  SyntheticSpec spec;
  spec.min_shapes = 0;
  spec.max_shapes = 0;
  spec.image_size = 64;
  Rng rng(1);
  Scene s = generate_scene(spec, rng);
  CHECK(s.annotations.empty());
  CHECK(s.width() == 64);
  CHECK(s.height() == 64);
}

TEST_CASE("rasterized disk area stays within a perimeter of pi r^2") {
  SyntheticSpec spec;
  spec.min_shapes = 1;
  spec.max_shapes = 1;
  spec.image_size = 160;
  spec.noise_sigma = 0;
  int disks_seen = 0;
  for (std::uint64_t seed = 0; seed < 64 && disks_seen < 8; ++seed) {
    Rng rng(seed);
    Scene s = generate_scene(spec, rng);
    if (s.annotations.size() != 1 || s.annotations[0].category_id != 0) continue;
    ++disks_seen;
    const auto& ann = s.annotations[0];
    const double r = ann.bbox.max_dim() / 2.0;
    const double expected = 3.14159265358979 * r * r;
    const double perimeter = 2 * 3.14159265358979 * r;
    CHECK(std::fabs(expected - static_cast<double>(ann.area)) <= perimeter + 8);
  }
  CHECK(disks_seen >= 8);
}

TEST_CASE("occluded instances keep only visible pixels; masks stay disjoint") {
  SyntheticSpec spec;
  spec.min_shapes = 3;
  spec.max_shapes = 4;
  spec.image_size = 128;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed * 7 + 1);
    Scene s = generate_scene(spec, rng);
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(128) * 128, 0);
    for (const auto& ann : s.annotations) {
      long area = 0;
      for (std::size_t p = 0; p < ann.mask.size(); ++p) {
        if (!ann.mask[p]) continue;
        ++area;
        CHECK(seen[p] == 0);  // no pixel belongs to two instances
        seen[p] = 1;
      }
      CHECK(area == ann.area);
      CHECK(bbox_of_mask(ann.mask, 128, 128).max_dim() == ann.bbox.max_dim());
    }
  }
}

TEST_CASE("canonical positive at native scale is an exact crop") {
  // rect of max dim 32 == canonical_max_dim, even-aligned: no resampling
  Scene s = rect_scene(128, {{40, 48, 32, 24}});
  SamplerConfig cfg = default_sampler();
  auto sample = canonical_positive(s, 0, 64, cfg);
  REQUIRE(sample.has_value());
  CHECK(sample->pose.side == doctest::Approx(64.0));
  // patch center pixel is part of the object
  CHECK(sample->triplet.mask[static_cast<std::size_t>(32) * 64 + 32] == 1);
  // pixels copied verbatim from the scene
  const int px0 = static_cast<int>(sample->pose.cx) - 32;
  const int py0 = static_cast<int>(sample->pose.cy) - 32;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      CHECK(sample->triplet.patch.at3(0, y, x) == s.image.at3(0, py0 + y, px0 + x));
}

TEST_CASE("canonical positive rescales the object max dim to within one pixel") {
  SamplerConfig cfg = default_sampler();
  for (int dim : {16, 33, 64, 90}) {
    Scene s = rect_scene(220, {{30, 40, dim, (dim * 3) / 4}});
    auto sample = canonical_positive(s, 0, 64, cfg);
    REQUIRE(sample.has_value());
    std::vector<std::uint8_t> bits(sample->triplet.mask.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = sample->triplet.mask[i] == 1;
    const BBox measured = bbox_of_mask(bits, 64, 64);
    CHECK(std::abs(measured.max_dim() - cfg.canonical_max_dim) <= 1);
  }
}

TEST_CASE("a second object in the patch is never positive in the mask") {
  Scene s = rect_scene(160, {{40, 40, 32, 32}, {76, 40, 24, 24}});
  SamplerConfig cfg = default_sampler();
  auto sample = canonical_positive(s, 0, 64, cfg);
  REQUIRE(sample.has_value());
  const auto& ann0 = s.annotations[0];
  const double step = sample->pose.side / 64.0;
  long positives = 0;
  for (int py = 0; py < 64; ++py) {
    for (int px = 0; px < 64; ++px) {
      if (sample->triplet.mask[static_cast<std::size_t>(py) * 64 + px] != 1) continue;
      ++positives;
      const int ix = static_cast<int>(std::floor(sample->pose.cx + (px + 0.5 - 32.0) * step));
      const int iy = static_cast<int>(std::floor(sample->pose.cy + (py + 0.5 - 32.0) * step));
      CHECK(ann0.mask[static_cast<std::size_t>(iy) * 160 + ix] == 1);
    }
  }
  CHECK(positives > 0);
}

TEST_CASE("degenerate annotations yield a skip signal") {
  Scene s = rect_scene(64, {{10, 10, 8, 8}});
  s.annotations[0].area = 0;
  s.annotations[0].bbox = {0, 0, 0, 0};
  SamplerConfig cfg = default_sampler();
  CHECK_FALSE(canonical_positive(s, 0, 64, cfg).has_value());
}

TEST_CASE("zero jitter equals the canonical positive") {
  Scene s = rect_scene(160, {{50, 60, 28, 20}});
  SamplerConfig cfg = default_sampler();
  auto canonical = canonical_positive(s, 0, 64, cfg);
  JitterDraw zero{};
  PatchPose pose = apply_jitter(canonical->pose, zero, 64);
  TrainingTriplet jittered = extract_triplet(s, pose, 0, 64);
  CHECK(jittered.patch.data == canonical->triplet.patch.data);
  CHECK(jittered.mask == canonical->triplet.mask);
}

TEST_CASE("flip-only jitter mirrors patch and mask exactly") {
  Scene s = rect_scene(160, {{52, 61, 27, 19}});
  SamplerConfig cfg = default_sampler();
  auto canonical = canonical_positive(s, 0, 64, cfg);
  JitterDraw flip{};
  flip.flip = true;
  PatchPose pose = apply_jitter(canonical->pose, flip, 64);
  TrainingTriplet flipped = extract_triplet(s, pose, 0, 64);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        CHECK(flipped.patch.at3(c, y, x) == canonical->triplet.patch.at3(c, y, 63 - x));
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      CHECK(flipped.mask[static_cast<std::size_t>(y) * 64 + x] ==
            canonical->triplet.mask[static_cast<std::size_t>(y) * 64 + 63 - x]);
}

TEST_CASE("jitter draws stay inside the configured ranges") {
  SamplerConfig cfg = default_sampler();
  Rng rng(5);
  Scene s = rect_scene(200, {{60, 70, 40, 30}});
  const PatchPose canonical = canonical_pose(s.annotations[0], 64, cfg);
  for (int i = 0; i < 1000; ++i) {
    const JitterDraw d = draw_jitter(cfg, rng);
    CHECK(std::fabs(d.dx) <= 16.0);
    CHECK(std::fabs(d.dy) <= 16.0);
    const double factor = std::exp2(d.scale_exp);
    CHECK(factor >= std::exp2(-0.25));
    CHECK(factor <= std::exp2(0.25));
    const PatchPose pose = apply_jitter(canonical, d, 64);
    const PoseDeviation dev = pose_deviation(pose, canonical, 64);
    CHECK(dev.translate <= 16.0 + 1e-9);
    CHECK(dev.scale_exp <= 0.25 + 1e-9);
  }
}

TEST_CASE("negatives from an empty scene always qualify") {
  SyntheticSpec spec;
  spec.min_shapes = 0;
  spec.max_shapes = 0;
  spec.image_size = 96;
  Rng rng(6);
  Scene s = generate_scene(spec, rng);
  SamplerConfig cfg = default_sampler();
  auto sample = sample_negative(s, 64, cfg, rng);
  REQUIRE(sample.has_value());
  CHECK(sample->triplet.label == -1);
  CHECK(sample->triplet.mask.empty());
}

TEST_CASE("emitted negatives violate the positive tolerance of every annotation") {
  SamplerConfig cfg = default_sampler();
  Rng rng(7);
  Scene s = rect_scene(200, {{30, 30, 40, 28}, {120, 110, 36, 36}});
  for (int i = 0; i < 300; ++i) {
    auto sample = sample_negative(s, 64, cfg, rng);
    REQUIRE(sample.has_value());
    for (const auto& ann : s.annotations) {
      const PatchPose canon = canonical_pose(ann, 64, cfg);
      const PoseDeviation dev = pose_deviation(sample->pose, canon, 64);
      const bool far_enough = dev.translate >= cfg.negative_translate ||
                              dev.scale_exp >= cfg.negative_scale_exp;
      CHECK(far_enough);
    }
  }
}

TEST_CASE("a perfectly centered canonical pose is not a valid negative") {
  SamplerConfig cfg = default_sampler();
  Scene s = rect_scene(200, {{80, 80, 40, 30}});
  const PatchPose canon = canonical_pose(s.annotations[0], 64, cfg);
  const PoseDeviation dev = pose_deviation(canon, canon, 64);
  CHECK(dev.translate < cfg.negative_translate);
  CHECK(dev.scale_exp < cfg.negative_scale_exp);
}

TEST_CASE("scoring batches are label-balanced, segmentation batches all-positive") {
  SyntheticSpec spec;
  spec.image_size = 128;
  std::vector<Scene> scenes;
  for (std::uint64_t i = 0; i < 6; ++i) {
    Rng rng(i + 40);
    scenes.push_back(generate_scene(spec, rng));
  }
  SamplerConfig cfg;
  cfg.canonical_max_dim = canonical_max_dim_for_patch(64);
  Rng rng(8);
  auto scoring = make_batch(scenes, Branch::Scoring, 32, 64, cfg, rng);
  REQUIRE(scoring.size() == 32);
  int pos = 0, neg = 0;
  for (const auto& t : scoring) (t.label == 1 ? pos : neg)++;
  CHECK(pos == 16);
  CHECK(neg == 16);

  auto seg = make_batch(scenes, Branch::Segmentation, 8, 64, cfg, rng);
  for (const auto& t : seg) CHECK(t.label == 1);

  Rng r1(99), r2(99);
  auto a = make_batch(scenes, Branch::Scoring, 8, 64, cfg, r1);
  auto b = make_batch(scenes, Branch::Scoring, 8, 64, cfg, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].patch.data == b[i].patch.data);
  }
}

TEST_CASE("make_batch names the shortfall when positives are impossible") {
  SyntheticSpec spec;
  spec.min_shapes = 0;
  spec.max_shapes = 0;
  spec.image_size = 64;
  Rng grng(3);
  std::vector<Scene> scenes = {generate_scene(spec, grng)};
  SamplerConfig cfg = default_sampler();
  Rng rng(9);
  CHECK_THROWS_WITH_AS(make_batch(scenes, Branch::Segmentation, 4, 64, cfg, rng),
                       doctest::Contains("positives"), UsageError);
}

TEST_CASE("sampler config invariants") {
  SamplerConfig cfg = default_sampler();
  cfg.negative_translate = cfg.jitter_translate;  // must strictly exceed
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(canonical_max_dim_for_patch(224) == 128);
  CHECK(canonical_max_dim_for_patch(64) == 37);
}

TEST_CASE("RLE: all-zeros mask is a single run") {
  std::vector<std::uint8_t> zeros(40, 0);
  auto runs = rle_encode(zeros.data(), zeros.size());
  REQUIRE(runs.size() == 1);
  CHECK(runs[0] == 40);
  CHECK(rle_decode(runs, 40) == zeros);
}

TEST_CASE("RLE round-trips 1000 random masks") {
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.uniform_below(400);
    std::vector<std::uint8_t> bits(n);
    const double density = rng.uniform();
    for (auto& b : bits) b = rng.bernoulli(density);
    CHECK(rle_decode(rle_encode(bits.data(), n), n) == bits);
  }
}

TEST_CASE("RLE rejects runs that do not cover the mask") {
  CHECK_THROWS_AS(rle_decode({3, 4}, 10), DataError);
  CHECK_THROWS_AS(rle_decode({30}, 10), DataError);
}
